//! C ABI over the lexicon-induction core.
//!
//! The surface covers the steps a foreign-language harness needs to drive its
//! own text generator: load embeddings and lexicons, pick in-context
//! examples, render prompts, pull a prediction out of beam text, and score
//! the result. Generation backends and the pipeline orchestrator stay on the
//! Rust side.
//!
//! Conventions:
//! - Every fallible function returns [`BliStatus`]; `BLI_STATUS_OK` is 0.
//! - On failure, [`bli_last_error`] returns a message for the current thread,
//!   valid until the next failing call on that thread.
//! - Handles (`BliEmbeddings`, `BliLexicon`) are opaque; free them with the
//!   matching `_free` function. Strings returned through `char **` out-params
//!   are owned by the caller and must be released with [`bli_string_free`].
//! - Structured results (examples, predictions, reports) come back as JSON in
//!   the same shape the pipeline writes to its artifact files.

use std::cell::RefCell;
use std::collections::HashSet;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use bli_core::config::PipelineError;
use bli_core::embeddings::{load_vec, EmbeddingStore, DEFAULT_TRIM};
use bli_core::eval::{chi_square_compare, score, EvalConfig};
use bli_core::extraction::{extract, special_token_profile};
use bli_core::generation::{BeamResult, GenerationParams, ScoredSequence};
use bli_core::lexicon::{gold_map, load_lexicon, LanguagePair, LanguageTable, Lexicon, LexiconRole};
use bli_core::prompts::{
    render, select_examples, IclExample, PromptConfig, Provenance, Selection, SelectionMode,
};
use bli_core::templates::{ShotKind, TemplateCatalog};
use bli_core::PromptInstance;

/// Result code for every fallible call. Config/data/backend match the CLI
/// exit codes for the same failure classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BliStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArg = 1,
    /// Invalid configuration or arguments.
    Config = 2,
    /// Unusable input data (file contents, lookups, counts).
    Data = 3,
    /// Generation backend failure.
    Backend = 4,
    /// A string argument was not valid UTF-8.
    Utf8 = 5,
    /// Token or template id not present.
    NotFound = 6,
    /// Internal panic was caught at the boundary.
    Panic = 7,
}

/// Loaded embedding store (opaque).
pub struct BliEmbeddings(EmbeddingStore);

/// Loaded translation lexicon (opaque).
pub struct BliLexicon(Lexicon);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let owned = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(owned));
}

fn fail(e: impl Into<PipelineError>) -> BliStatus {
    let e = e.into();
    set_error(&e.to_string());
    match e {
        PipelineError::Config(_) => BliStatus::Config,
        PipelineError::Data(_) => BliStatus::Data,
        PipelineError::Backend(_) => BliStatus::Backend,
    }
}

fn not_found(msg: &str) -> BliStatus {
    set_error(msg);
    BliStatus::NotFound
}

fn null_arg(name: &str) -> BliStatus {
    set_error(&format!("argument {name} must not be null"));
    BliStatus::NullArg
}

fn guard<F: FnOnce() -> BliStatus>(f: F) -> BliStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic caught at FFI boundary");
            BliStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn req_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, BliStatus> {
    if ptr.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("argument {name} is not valid UTF-8"));
        BliStatus::Utf8
    })
}

unsafe fn opt_str<'a>(ptr: *const c_char, name: &str) -> Result<Option<&'a str>, BliStatus> {
    if ptr.is_null() {
        Ok(None)
    } else {
        req_str(ptr, name).map(Some)
    }
}

fn out_string(out: *mut *mut c_char, value: String) -> BliStatus {
    let c = CString::new(value.replace('\0', " ")).unwrap_or_default();
    unsafe { *out = c.into_raw() };
    BliStatus::Ok
}

/// Unknown language codes name themselves, so any pair renders.
fn lang_pair(src: &str, tgt: &str) -> Result<LanguagePair, BliStatus> {
    let mut table = LanguageTable::builtin();
    if table.name(src).is_none() {
        table.insert(src, src);
    }
    if table.name(tgt).is_none() {
        table.insert(tgt, tgt);
    }
    LanguagePair::new(src, tgt, &table).map_err(|e| {
        set_error(&e.to_string());
        BliStatus::Config
    })
}

/// Crate version as a static string; never freed.
#[no_mangle]
pub extern "C" fn bli_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread, or null. The pointer
/// is invalidated by the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bli_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |msg| msg.as_ptr())
    })
}

/// Free a string returned through a `char **` out-parameter. Null is a no-op.
///
/// # Safety
/// `s` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn bli_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load a word-embedding file (`.vec`, optionally gzipped). `trim` caps the
/// store to the first (most frequent) entries; 0 applies the default cap of
/// 200000. Rows are L2-normalized unless `normalize` is false.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bli_embeddings_load(
    path: *const c_char,
    trim: usize,
    normalize: bool,
    out: *mut *mut BliEmbeddings,
) -> BliStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = std::ptr::null_mut();
        let path = match req_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let trim = if trim == 0 { DEFAULT_TRIM } else { trim };
        match load_vec(Path::new(path), trim, normalize) {
            Ok(store) => {
                *out = Box::into_raw(Box::new(BliEmbeddings(store)));
                BliStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `store` must be null or a pointer from [`bli_embeddings_load`].
#[no_mangle]
pub unsafe extern "C" fn bli_embeddings_free(store: *mut BliEmbeddings) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Number of words, or 0 for a null handle.
///
/// # Safety
/// `store` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn bli_embeddings_len(store: *const BliEmbeddings) -> usize {
    store.as_ref().map_or(0, |s| s.0.len())
}

/// Vector dimensionality, or 0 for a null handle.
///
/// # Safety
/// `store` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn bli_embeddings_dim(store: *const BliEmbeddings) -> usize {
    store.as_ref().map_or(0, |s| s.0.dim())
}

/// Frequency rank (0 = most frequent) of `token`, matching verbatim first and
/// then by lowercase.
///
/// # Safety
/// Pointer arguments must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bli_embeddings_rank(
    store: *const BliEmbeddings,
    token: *const c_char,
    out_rank: *mut usize,
) -> BliStatus {
    guard(|| {
        let Some(store) = store.as_ref() else {
            return null_arg("store");
        };
        if out_rank.is_null() {
            return null_arg("out_rank");
        }
        let token = match req_str(token, "token") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match store
            .0
            .frequency_rank(token)
            .or_else(|| store.0.rank_of_lowercase(&token.to_lowercase()))
        {
            Some(rank) => {
                *out_rank = rank;
                BliStatus::Ok
            }
            None => not_found(&format!("token {token:?} not in embeddings")),
        }
    })
}

/// Exact top-k cosine neighbours of `query` within `store`. The caller
/// provides `out_indices` and `out_scores` arrays of capacity `k`;
/// `out_count` receives how many entries were written (less than `k` when the
/// vocabulary is small). Ties break toward the more frequent word.
///
/// # Safety
/// Array arguments must point to at least `k` writable elements.
#[no_mangle]
pub unsafe extern "C" fn bli_top_k_cosine(
    store: *const BliEmbeddings,
    query: *const c_char,
    k: usize,
    exclude_self: bool,
    out_indices: *mut usize,
    out_scores: *mut f32,
    out_count: *mut usize,
) -> BliStatus {
    guard(|| {
        let Some(store) = store.as_ref() else {
            return null_arg("store");
        };
        if out_indices.is_null() || out_scores.is_null() || out_count.is_null() {
            return null_arg("out_indices/out_scores/out_count");
        }
        *out_count = 0;
        let query = match req_str(query, "query") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let Some(idx) = store
            .0
            .frequency_rank(query)
            .or_else(|| store.0.rank_of_lowercase(&query.to_lowercase()))
        else {
            return not_found(&format!("query {query:?} not in embeddings"));
        };
        let exclude: HashSet<usize> = if exclude_self {
            HashSet::from([idx])
        } else {
            HashSet::new()
        };
        let row = store.0.row(idx).to_vec();
        match bli_core::retrieval::top_k_cosine(&store.0, &row, k, &exclude) {
            Ok(neighbors) => {
                for (i, n) in neighbors.iter().enumerate() {
                    *out_indices.add(i) = n.index;
                    *out_scores.add(i) = n.score;
                }
                *out_count = neighbors.len();
                BliStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Copy the token at `index` into the caller-owned `out` string.
///
/// # Safety
/// Pointer arguments must be valid.
#[no_mangle]
pub unsafe extern "C" fn bli_embeddings_token(
    store: *const BliEmbeddings,
    index: usize,
    out: *mut *mut c_char,
) -> BliStatus {
    guard(|| {
        let Some(store) = store.as_ref() else {
            return null_arg("store");
        };
        if out.is_null() {
            return null_arg("out");
        }
        *out = std::ptr::null_mut();
        if index >= store.0.len() {
            return not_found(&format!(
                "index {index} out of range for {} tokens",
                store.0.len()
            ));
        }
        out_string(out, store.0.token(index).to_string())
    })
}

/// Load a tab-separated translation lexicon. `role` is 0 for a seed
/// dictionary, 1 for a test dictionary. Language arguments are ISO codes.
///
/// # Safety
/// Pointer arguments must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bli_lexicon_load(
    path: *const c_char,
    src_lang: *const c_char,
    tgt_lang: *const c_char,
    role: u32,
    out: *mut *mut BliLexicon,
) -> BliStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = std::ptr::null_mut();
        let (path, src, tgt) = match (|| {
            Ok::<_, BliStatus>((
                req_str(path, "path")?,
                req_str(src_lang, "src_lang")?,
                req_str(tgt_lang, "tgt_lang")?,
            ))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        let role = match role {
            0 => LexiconRole::Seed,
            1 => LexiconRole::Test,
            other => {
                set_error(&format!("role {other} is not 0 (seed) or 1 (test)"));
                return BliStatus::Config;
            }
        };
        let pair = match lang_pair(src, tgt) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match load_lexicon(Path::new(path), pair, role) {
            Ok(lex) => {
                *out = Box::into_raw(Box::new(BliLexicon(lex)));
                BliStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `lexicon` must be null or a pointer from [`bli_lexicon_load`].
#[no_mangle]
pub unsafe extern "C" fn bli_lexicon_free(lexicon: *mut BliLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Number of translation pairs, or 0 for a null handle.
///
/// # Safety
/// `lexicon` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn bli_lexicon_len(lexicon: *const BliLexicon) -> usize {
    lexicon.as_ref().map_or(0, |l| l.0.entries.len())
}

/// Number of templates in the built-in catalog.
#[no_mangle]
pub extern "C" fn bli_template_count() -> u32 {
    TemplateCatalog::builtin().templates().len() as u32
}

/// Recorded best template id for a model family. `few_shot` false selects the
/// zero-shot table.
///
/// # Safety
/// Pointer arguments must be valid; `model` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bli_best_template(
    model: *const c_char,
    few_shot: bool,
    out_id: *mut u32,
) -> BliStatus {
    guard(|| {
        if out_id.is_null() {
            return null_arg("out_id");
        }
        let model = match req_str(model, "model") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let kind = if few_shot { ShotKind::FewShot } else { ShotKind::ZeroShot };
        match TemplateCatalog::builtin().best_template(model, kind) {
            Ok(t) => {
                *out_id = t.id;
                BliStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Whether template `id` takes in-context examples.
///
/// # Safety
/// `out_few_shot` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bli_template_is_few_shot(id: u32, out_few_shot: *mut bool) -> BliStatus {
    guard(|| {
        if out_few_shot.is_null() {
            return null_arg("out_few_shot");
        }
        match TemplateCatalog::builtin().get(id) {
            Some(t) => {
                *out_few_shot = t.shot_kind == ShotKind::FewShot;
                BliStatus::Ok
            }
            None => not_found(&format!("no template with id {id}")),
        }
    })
}

/// Render one prompt. `example_sources`/`example_targets` are parallel arrays
/// of `n_examples` strings (both may be null when `n_examples` is 0; zero-shot
/// templates require 0 examples, few-shot templates at least 1). `mask_token`
/// null selects the default `<extra_id_0>`. The prompt text is returned
/// through `out_prompt`.
///
/// # Safety
/// Array arguments must hold `n_examples` valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn bli_render_prompt(
    template_id: u32,
    src_lang: *const c_char,
    tgt_lang: *const c_char,
    query: *const c_char,
    example_sources: *const *const c_char,
    example_targets: *const *const c_char,
    n_examples: usize,
    mask_token: *const c_char,
    out_prompt: *mut *mut c_char,
) -> BliStatus {
    guard(|| {
        if out_prompt.is_null() {
            return null_arg("out_prompt");
        }
        *out_prompt = std::ptr::null_mut();
        let parsed = (|| {
            let src = req_str(src_lang, "src_lang")?;
            let tgt = req_str(tgt_lang, "tgt_lang")?;
            let query = req_str(query, "query")?;
            let mask = opt_str(mask_token, "mask_token")?;
            Ok::<_, BliStatus>((src, tgt, query, mask))
        })();
        let (src, tgt, query, mask) = match parsed {
            Ok(v) => v,
            Err(status) => return status,
        };
        if n_examples > 0 && (example_sources.is_null() || example_targets.is_null()) {
            return null_arg("example_sources/example_targets");
        }
        let mut examples = Vec::with_capacity(n_examples);
        for i in 0..n_examples {
            let s = match req_str(*example_sources.add(i), "example_sources[i]") {
                Ok(s) => s,
                Err(status) => return status,
            };
            let t = match req_str(*example_targets.add(i), "example_targets[i]") {
                Ok(t) => t,
                Err(status) => return status,
            };
            examples.push(IclExample {
                source: s.to_string(),
                target: t.to_string(),
                source_rank: None,
            });
        }

        let Some(template) = TemplateCatalog::builtin().get(template_id) else {
            return not_found(&format!("no template with id {template_id}"));
        };
        let pair = match lang_pair(src, tgt) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let table = pair_table(&pair);
        let cfg = PromptConfig {
            n_shots: n_examples,
            selection_mode: if n_examples == 0 { SelectionMode::None } else { SelectionMode::Nearest },
            mask_token: mask.unwrap_or("<extra_id_0>").to_string(),
            language_names: table,
            strict: false,
        };
        match render(template, &pair, query, &Selection::from_examples(examples), &cfg) {
            Ok(instance) => out_string(out_prompt, instance.rendered),
            Err(e) => fail(e),
        }
    })
}

fn pair_table(pair: &LanguagePair) -> LanguageTable {
    let mut table = LanguageTable::builtin();
    table.insert(&pair.src, &pair.src_name);
    table.insert(&pair.tgt, &pair.tgt_name);
    table
}

/// Pick in-context examples for `query` from a seed lexicon. `mode` is
/// 0 nearest-neighbour, 1 random (seeded by `random_seed`), 2 none.
/// `tgt` may be null; when present it breaks multi-translation ties toward
/// the more frequent target word. The result is JSON:
/// `{"examples":[{"source","target","source_rank"}...],"oov_fallback":bool,"shortfall":bool}`.
///
/// # Safety
/// Pointer arguments must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bli_select_examples(
    seed: *const BliLexicon,
    aux: *const BliEmbeddings,
    tgt: *const BliEmbeddings,
    query: *const c_char,
    n_shots: usize,
    mode: u32,
    random_seed: u64,
    exclude_self: bool,
    out_json: *mut *mut c_char,
) -> BliStatus {
    guard(|| {
        let Some(seed) = seed.as_ref() else {
            return null_arg("seed");
        };
        let Some(aux) = aux.as_ref() else {
            return null_arg("aux");
        };
        if out_json.is_null() {
            return null_arg("out_json");
        }
        *out_json = std::ptr::null_mut();
        let query = match req_str(query, "query") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let selection_mode = match mode {
            0 => SelectionMode::Nearest,
            1 => SelectionMode::Random { seed: random_seed },
            2 => SelectionMode::None,
            other => {
                set_error(&format!(
                    "mode {other} is not 0 (nearest), 1 (random) or 2 (none)"
                ));
                return BliStatus::Config;
            }
        };
        let cfg = PromptConfig {
            n_shots,
            selection_mode,
            mask_token: "<extra_id_0>".to_string(),
            language_names: LanguageTable::builtin(),
            strict: false,
        };
        let tgt_store = tgt.as_ref().map(|t| &t.0);
        match select_examples(query, &seed.0, &aux.0, tgt_store, &cfg, exclude_self) {
            Ok(selection) => {
                let json = serde_json::json!({
                    "examples": selection.examples,
                    "oov_fallback": selection.oov_fallback,
                    "shortfall": selection.shortfall,
                });
                out_string(out_json, json.to_string())
            }
            Err(e) => fail(e),
        }
    })
}

/// Extract a prediction from ranked beam texts. `beam_texts` holds `n_beams`
/// candidate continuations, best first. `prompt_rendered` non-null means the
/// generator echoed the prompt, and that prefix is stripped. `mask_token`
/// non-null is removed from outputs alongside the `model_family` special
/// tokens (null family uses the generic profile). The result is the
/// prediction as JSON: `{"query","predicted","beam_rank_used","candidates_ranked"}`.
///
/// # Safety
/// `beam_texts` must hold `n_beams` valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn bli_extract(
    beam_texts: *const *const c_char,
    n_beams: usize,
    query: *const c_char,
    prompt_rendered: *const c_char,
    mask_token: *const c_char,
    model_family: *const c_char,
    tgt: *const BliEmbeddings,
    out_json: *mut *mut c_char,
) -> BliStatus {
    guard(|| {
        let Some(tgt) = tgt.as_ref() else {
            return null_arg("tgt");
        };
        if out_json.is_null() {
            return null_arg("out_json");
        }
        *out_json = std::ptr::null_mut();
        if n_beams > 0 && beam_texts.is_null() {
            return null_arg("beam_texts");
        }
        let parsed = (|| {
            let query = opt_str(query, "query")?.unwrap_or("");
            let prompt = opt_str(prompt_rendered, "prompt_rendered")?;
            let mask = opt_str(mask_token, "mask_token")?;
            let family = opt_str(model_family, "model_family")?;
            Ok::<_, BliStatus>((query, prompt, mask, family))
        })();
        let (query, prompt_rendered, mask, family) = match parsed {
            Ok(v) => v,
            Err(status) => return status,
        };
        let mut sequences = Vec::with_capacity(n_beams);
        for i in 0..n_beams {
            let text = match req_str(*beam_texts.add(i), "beam_texts[i]") {
                Ok(t) => t,
                Err(status) => return status,
            };
            sequences.push(ScoredSequence {
                text: text.to_string(),
                score: -(i as f64),
            });
        }
        let beams = BeamResult { sequences };
        let n = n_beams.max(1);
        let params = GenerationParams {
            beam_size: n,
            max_new_tokens: 5,
            num_return_sequences: n,
            echo_input: prompt_rendered.is_some(),
        };
        let pair = match lang_pair("xx", "yy") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let prompt = PromptInstance {
            id: 0,
            template_id: 0,
            pair,
            query: query.to_string(),
            examples: Vec::new(),
            rendered: prompt_rendered.unwrap_or("").to_string(),
            mask_token: mask.map(str::to_string),
            provenance: Provenance::default(),
        };
        let special = special_token_profile(family.unwrap_or("generic"));
        let prediction = extract(&beams, &prompt, &tgt.0, &params, &special);
        match serde_json::to_string(&prediction) {
            Ok(json) => out_string(out_json, json),
            Err(e) => {
                set_error(&format!("serializing prediction: {e}"));
                BliStatus::Data
            }
        }
    })
}

/// Score predictions against a test lexicon. `predictions_json` is a JSON
/// array in the shape [`bli_extract`] returns (also the pipeline's
/// predictions.jsonl records). `ks`/`n_ks` select the precision cutoffs;
/// null/0 uses [1, 5]. The evaluation report is returned as JSON.
///
/// # Safety
/// Pointer arguments must be valid; `ks` must hold `n_ks` elements.
#[no_mangle]
pub unsafe extern "C" fn bli_score(
    predictions_json: *const c_char,
    test: *const BliLexicon,
    ks: *const usize,
    n_ks: usize,
    out_report_json: *mut *mut c_char,
) -> BliStatus {
    guard(|| {
        let Some(test) = test.as_ref() else {
            return null_arg("test");
        };
        if out_report_json.is_null() {
            return null_arg("out_report_json");
        }
        *out_report_json = std::ptr::null_mut();
        let json = match req_str(predictions_json, "predictions_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let predictions: Vec<bli_core::Prediction> = match serde_json::from_str(json) {
            Ok(p) => p,
            Err(e) => {
                set_error(&format!("parsing predictions: {e}"));
                return BliStatus::Data;
            }
        };
        let cfg = if ks.is_null() || n_ks == 0 {
            EvalConfig::default()
        } else {
            EvalConfig { ks: std::slice::from_raw_parts(ks, n_ks).to_vec() }
        };
        match score(&predictions, &gold_map(&test.0), &cfg) {
            Ok(report) => match serde_json::to_string(&report) {
                Ok(json) => out_string(out_report_json, json),
                Err(e) => {
                    set_error(&format!("serializing report: {e}"));
                    BliStatus::Data
                }
            },
            Err(e) => fail(e),
        }
    })
}

/// Chi-square test (1 degree of freedom, no continuity correction) comparing
/// two correct/total systems. Writes the statistic and p-value.
///
/// # Safety
/// `out_chi2` and `out_p` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bli_chi_square(
    correct_a: u64,
    total_a: u64,
    correct_b: u64,
    total_b: u64,
    out_chi2: *mut f64,
    out_p: *mut f64,
) -> BliStatus {
    guard(|| {
        if out_chi2.is_null() || out_p.is_null() {
            return null_arg("out_chi2/out_p");
        }
        match chi_square_compare(correct_a, total_a, correct_b, total_b) {
            Ok((chi2, p)) => {
                *out_chi2 = chi2;
                *out_p = p;
                BliStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
