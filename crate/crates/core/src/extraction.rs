//! Turn ranked beam outputs into one word prediction per query: strip the
//! echoed input and special tokens, then take the first word that appears in
//! the target vocabulary.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingStore;
use crate::generation::{BeamResult, GenerationParams};
use crate::prompts::PromptInstance;
use crate::templates::model_key;

/// Characters trimmed from both ends of each whitespace token.
pub const PUNCTUATION: &[char] = &['.', ',', ':', ';', '!', '?', '"', '\'', '»', '«'];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub query: String,
    /// Lowercase form of the winning word; always a target-vocabulary member.
    pub predicted: Option<String>,
    /// 1-based rank of the beam the prediction came from.
    pub beam_rank_used: Option<usize>,
    /// Per-beam first in-vocab words, deduplicated, in beam order.
    pub candidates_ranked: Vec<String>,
}

/// Literal tokens to delete from generated text for a model family. Encoder-
/// decoder mask fillers emit their sentinel; everyone gets the conventional
/// pad/BOS/EOS literals. Unknown families get the generic profile.
pub fn special_token_profile(model_family: &str) -> Vec<String> {
    let key = model_key(model_family);
    let mut tokens: Vec<String> = Vec::new();
    if key.starts_with("mt5") || key.starts_with("mt0") {
        tokens.push("<extra_id_0>".to_string());
    }
    tokens.extend(["<pad>".to_string(), "<s>".to_string(), "</s>".to_string()]);
    tokens
}

fn first_in_vocab(cleaned: &str, tgt_vocab: &EmbeddingStore) -> Option<String> {
    cleaned.split_whitespace().find_map(|raw| {
        let word = raw.trim_matches(PUNCTUATION);
        if word.is_empty() {
            return None;
        }
        let lower = word.to_lowercase();
        tgt_vocab.contains_lowercase(&lower).then_some(lower)
    })
}

/// Apply the extraction rule to one prompt's beams.
///
/// Per beam, best first: strip the rendered prompt prefix when the backend
/// echoes input, delete special-token literals (plus the prompt's own mask
/// literal), then split on whitespace, trim surrounding punctuation from each
/// token, and keep the first token whose lowercase form is in the target
/// vocabulary. The overall prediction comes from the best beam that produced
/// one; beams with no in-vocab word contribute nothing.
pub fn extract(
    beams: &BeamResult,
    prompt: &PromptInstance,
    tgt_vocab: &EmbeddingStore,
    params: &GenerationParams,
    special_tokens: &[String],
) -> Prediction {
    let mut strip: Vec<&str> = special_tokens.iter().map(String::as_str).collect();
    if let Some(mask) = prompt.mask_token.as_deref() {
        if !strip.contains(&mask) {
            strip.push(mask);
        }
    }
    // longest first so no literal survives as a substring of another
    strip.sort_by_key(|s| std::cmp::Reverse(s.len()));

    let mut prediction = Prediction { query: prompt.query.clone(), ..Prediction::default() };
    for (i, seq) in beams.sequences.iter().enumerate() {
        let mut text = seq.text.as_str();
        if params.echo_input {
            if let Some(rest) = text.strip_prefix(prompt.rendered.as_str()) {
                text = rest;
            }
        }
        let mut cleaned = text.to_string();
        for literal in &strip {
            if cleaned.contains(literal) {
                cleaned = cleaned.replace(literal, " ");
            }
        }
        if let Some(word) = first_in_vocab(&cleaned, tgt_vocab) {
            if prediction.predicted.is_none() {
                prediction.predicted = Some(word.clone());
                prediction.beam_rank_used = Some(i + 1);
            }
            if !prediction.candidates_ranked.contains(&word) {
                prediction.candidates_ranked.push(word);
            }
        }
    }
    prediction
}

/// `query<TAB>predicted<TAB>beam_rank` per line; misses leave both fields empty.
pub fn write_predictions_tsv(path: &Path, predictions: &[Prediction]) -> std::io::Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for p in predictions {
        let rank = p.beam_rank_used.map(|r| r.to_string()).unwrap_or_default();
        writeln!(out, "{}\t{}\t{}", p.query, p.predicted.as_deref().unwrap_or(""), rank)?;
    }
    out.flush()
}

/// Full-fidelity export (keeps `candidates_ranked`), one JSON object per line.
pub fn write_predictions_jsonl(path: &Path, predictions: &[Prediction]) -> std::io::Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for p in predictions {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_predictions_jsonl(path: &Path) -> std::io::Result<Vec<Prediction>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut predictions = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        predictions.push(serde_json::from_str(&line)?);
    }
    Ok(predictions)
}
