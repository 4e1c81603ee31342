//! Bilingual dictionaries in the XLING tab-separated format.
//!
//! A lexicon file is UTF-8 with LF line endings and exactly one tab per row
//! ("source<TAB>target", no header). Seed and test dictionaries share the
//! format; a source may repeat with different targets (multi-gold).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {0}: row must be \"source<TAB>target\" with non-empty, space-free fields")]
    MalformedRow(usize),
    #[error("line {0}: duplicate (source, target) pair")]
    DuplicateRow(usize),
    #[error("lexicons cover different language pairs")]
    PairMismatch,
    #[error("unsupported language code {0:?}")]
    UnknownLanguage(String),
    #[error("source and target language must differ")]
    SameLanguage,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// ISO-639-1 code to English display name, used to fill language template slots.
#[derive(Debug, Clone)]
pub struct LanguageTable {
    names: BTreeMap<String, String>,
}

impl LanguageTable {
    /// The languages of the XLING and PanLex-BLI experiment sets.
    pub fn builtin() -> Self {
        let names = [
            ("bg", "Bulgarian"),
            ("ca", "Catalan"),
            ("de", "German"),
            ("en", "English"),
            ("fi", "Finnish"),
            ("fr", "French"),
            ("hr", "Croatian"),
            ("hu", "Hungarian"),
            ("it", "Italian"),
            ("ru", "Russian"),
            ("tr", "Turkish"),
        ]
        .into_iter()
        .map(|(c, n)| (c.to_string(), n.to_string()))
        .collect();
        Self { names }
    }

    pub fn insert(&mut self, code: &str, name: &str) {
        self.names.insert(code.to_string(), name.to_string());
    }

    pub fn name(&self, code: &str) -> Option<&str> {
        self.names.get(code).map(String::as_str)
    }
}

impl Default for LanguageTable {
    fn default() -> Self {
        Self::builtin()
    }
}

/// A directed language pair with the display names used in prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguagePair {
    pub src: String,
    pub tgt: String,
    pub src_name: String,
    pub tgt_name: String,
}

impl LanguagePair {
    pub fn new(src: &str, tgt: &str, table: &LanguageTable) -> Result<Self, LexiconError> {
        if src == tgt {
            return Err(LexiconError::SameLanguage);
        }
        let src_name = table
            .name(src)
            .ok_or_else(|| LexiconError::UnknownLanguage(src.to_string()))?;
        let tgt_name = table
            .name(tgt)
            .ok_or_else(|| LexiconError::UnknownLanguage(tgt.to_string()))?;
        Ok(Self {
            src: src.to_string(),
            tgt: tgt.to_string(),
            src_name: src_name.to_string(),
            tgt_name: tgt_name.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TranslationPair {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexiconRole {
    Seed,
    Test,
}

/// An ordered bilingual dictionary. Entry order is the file order, which for
/// XLING data doubles as frequency order; downstream tie-breaks rely on it.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub pair: LanguagePair,
    pub entries: Vec<TranslationPair>,
    pub role: LexiconRole,
}

pub fn load_lexicon(
    path: &Path,
    pair: LanguagePair,
    role: LexiconRole,
) -> Result<Lexicon, LexiconError> {
    let text = fs::read_to_string(path)?;
    let mut entries = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (source, target) = match (fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(t), None) => (s.trim(), t.trim()),
            _ => return Err(LexiconError::MalformedRow(line_no)),
        };
        if source.is_empty()
            || target.is_empty()
            || source.chars().any(char::is_whitespace)
            || target.chars().any(char::is_whitespace)
        {
            return Err(LexiconError::MalformedRow(line_no));
        }
        if !seen.insert((source.to_string(), target.to_string())) {
            return Err(LexiconError::DuplicateRow(line_no));
        }
        entries.push(TranslationPair {
            source: source.to_string(),
            target: target.to_string(),
        });
    }
    Ok(Lexicon { pair, entries, role })
}

pub fn write_lexicon(lex: &Lexicon, path: &Path) -> Result<(), LexiconError> {
    let mut out = String::new();
    for e in &lex.entries {
        out.push_str(&e.source);
        out.push('\t');
        out.push_str(&e.target);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Source word -> set of gold target words (multi-gold aware). Tokens verbatim;
/// scoring lowercases both sides at comparison time.
pub fn gold_map(lex: &Lexicon) -> BTreeMap<String, BTreeSet<String>> {
    let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for e in &lex.entries {
        map.entry(e.source.clone())
            .or_default()
            .insert(e.target.clone());
    }
    map
}

/// True iff no (source, target) pair occurs in both lexicons.
pub fn check_disjoint(seed: &Lexicon, test: &Lexicon) -> Result<bool, LexiconError> {
    if seed.pair.src != test.pair.src || seed.pair.tgt != test.pair.tgt {
        return Err(LexiconError::PairMismatch);
    }
    let seed_pairs: HashSet<(&str, &str)> = seed
        .entries
        .iter()
        .map(|e| (e.source.as_str(), e.target.as_str()))
        .collect();
    Ok(!test
        .entries
        .iter()
        .any(|e| seed_pairs.contains(&(e.source.as_str(), e.target.as_str()))))
}
