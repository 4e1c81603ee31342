//! Experiment configuration: TOML run configs with presets, env overrides for
//! backend credentials, and the error taxonomy that maps onto exit codes.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::embeddings::{EmbeddingError, DEFAULT_TRIM};
use crate::eval::{EvalConfig, EvalError};
use crate::generation::{
    GenerationError, GenerationParams, BACKEND_TOKEN_ENV, BACKEND_URL_ENV, DEFAULT_CHUNK_SIZE,
};
use crate::lexicon::{LanguagePair, LanguageTable, LexiconError};
use crate::procrustes::ProcrustesError;
use crate::prompts::{PromptConfig, PromptError, SelectionMode};
use crate::retrieval::RetrievalError;
use crate::templates::{ShotKind, Template, TemplateCatalog};

/// Failure category; the variant decides the process exit code
/// (config 2, data 3, backend 4).
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("backend error: {0}")]
    Backend(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) => 3,
            PipelineError::Backend(_) => 4,
        }
    }
}

impl From<LexiconError> for PipelineError {
    fn from(e: LexiconError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<EmbeddingError> for PipelineError {
    fn from(e: EmbeddingError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<RetrievalError> for PipelineError {
    fn from(e: RetrievalError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<PromptError> for PipelineError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::InsufficientSeeds { .. } => PipelineError::Data(e.to_string()),
            _ => PipelineError::Config(e.to_string()),
        }
    }
}

impl From<GenerationError> for PipelineError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::InvalidParams(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Backend(e.to_string()),
        }
    }
}

impl From<EvalError> for PipelineError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::BadConfig(_) => PipelineError::Config(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<ProcrustesError> for PipelineError {
    fn from(e: ProcrustesError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Data(e.to_string())
    }
}

/// BLI setup presets naming the supervision regimes: the 5k and 1k setups use
/// 5-shot nearest-neighbour prompting, the unsupervised setup uses zero-shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    FiveK,
    OneK,
    ZeroShot,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self, PipelineError> {
        match name {
            "5k" => Ok(Preset::FiveK),
            "1k" => Ok(Preset::OneK),
            "zero-shot" => Ok(Preset::ZeroShot),
            other => Err(PipelineError::Config(format!(
                "unknown preset {other:?} (expected 5k, 1k or zero-shot)"
            ))),
        }
    }

    pub fn n_shots(self) -> usize {
        match self {
            Preset::FiveK | Preset::OneK => 5,
            Preset::ZeroShot => 0,
        }
    }

    pub fn selection(self) -> SelectionMode {
        match self {
            Preset::FiveK | Preset::OneK => SelectionMode::Nearest,
            Preset::ZeroShot => SelectionMode::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateChoice {
    Id(u32),
    Model(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    MockOracle { noise_rank: Option<usize> },
    Echo,
    Http { url: String, token: Option<String>, chunk_size: usize, max_retries: usize },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub pair: LanguagePair,
    /// Space used for nearest-neighbour example selection over source words.
    pub aux_vectors: PathBuf,
    /// Target-language store: extraction vocabulary and frequency ranks.
    pub tgt_vectors: PathBuf,
    pub seed_lexicon: PathBuf,
    pub test_lexicon: PathBuf,
    pub trim: usize,
    pub template: TemplateChoice,
    /// Used instead of `template` when a sweep needs an n=0 run.
    pub zero_shot_template_id: Option<u32>,
    pub prompt: PromptConfig,
    pub generation: GenerationParams,
    pub backend: BackendSpec,
    pub eval: EvalConfig,
    pub out_dir: PathBuf,
}

// ---- raw TOML shape ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    pair: RawPair,
    data: RawData,
    prompt: RawPrompt,
    #[serde(default)]
    generation: RawGeneration,
    #[serde(default)]
    backend: RawBackend,
    #[serde(default)]
    eval: RawEval,
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    src: String,
    tgt: String,
    /// Display names for languages outside the built-in table.
    src_name: Option<String>,
    tgt_name: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    aux_vectors: String,
    tgt_vectors: String,
    seed_lexicon: String,
    test_lexicon: String,
    trim: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrompt {
    template_id: Option<u32>,
    model_family: Option<String>,
    zero_shot_template_id: Option<u32>,
    preset: Option<String>,
    n_shots: Option<usize>,
    selection: Option<String>,
    random_seed: Option<u64>,
    mask_token: Option<String>,
    strict: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeneration {
    beam_size: Option<usize>,
    max_new_tokens: Option<usize>,
    num_return_sequences: Option<usize>,
    echo_input: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBackend {
    kind: Option<String>,
    url: Option<String>,
    token: Option<String>,
    noise_rank: Option<usize>,
    chunk_size: Option<usize>,
    max_retries: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    ks: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: String,
}

impl RunConfig {
    /// Relative paths inside the file are resolved against its directory, so
    /// a config works no matter where the process is started from.
    pub fn from_path(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Config(format!("reading config {}: {e}", path.display()))
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            for p in [
                &mut cfg.aux_vectors,
                &mut cfg.tgt_vectors,
                &mut cfg.seed_lexicon,
                &mut cfg.test_lexicon,
                &mut cfg.out_dir,
            ] {
                if p.is_relative() {
                    *p = base.join(&p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let raw: RawConfig = toml::from_str(text)
            .map_err(|e| PipelineError::Config(format!("parsing config: {e}")))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, PipelineError> {
        let mut table = LanguageTable::builtin();
        if let Some(name) = &raw.pair.src_name {
            table.insert(&raw.pair.src, name);
        }
        if let Some(name) = &raw.pair.tgt_name {
            table.insert(&raw.pair.tgt, name);
        }
        let pair = LanguagePair::new(&raw.pair.src, &raw.pair.tgt, &table)
            .map_err(|e| PipelineError::Config(e.to_string()))?;

        let template = match (raw.prompt.template_id, raw.prompt.model_family.as_deref()) {
            (Some(id), None) => TemplateChoice::Id(id),
            (None, Some(model)) => TemplateChoice::Model(model.to_string()),
            (Some(_), Some(_)) => {
                return Err(PipelineError::Config(
                    "set either prompt.template_id or prompt.model_family, not both".into(),
                ))
            }
            (None, None) => {
                return Err(PipelineError::Config(
                    "one of prompt.template_id or prompt.model_family is required".into(),
                ))
            }
        };

        let preset = raw.prompt.preset.as_deref().map(Preset::parse).transpose()?;
        let n_shots = raw
            .prompt
            .n_shots
            .or(preset.map(Preset::n_shots))
            .unwrap_or(5);
        let random_seed = raw.prompt.random_seed.unwrap_or(42);
        let selection = match raw.prompt.selection.as_deref() {
            Some("nearest") => SelectionMode::Nearest,
            Some("random") => SelectionMode::Random { seed: random_seed },
            Some("none") => SelectionMode::None,
            Some(other) => {
                return Err(PipelineError::Config(format!(
                    "unknown selection mode {other:?} (expected nearest, random or none)"
                )))
            }
            None => preset.map(Preset::selection).unwrap_or(SelectionMode::Nearest),
        };
        let prompt = PromptConfig {
            n_shots,
            selection_mode: selection,
            mask_token: raw
                .prompt
                .mask_token
                .unwrap_or_else(|| PromptConfig::default().mask_token),
            language_names: table,
            strict: raw.prompt.strict.unwrap_or(false),
        };
        prompt.validate().map_err(PipelineError::from)?;

        let defaults = GenerationParams::default();
        let beam_size = raw.generation.beam_size.unwrap_or(defaults.beam_size);
        let generation = GenerationParams {
            beam_size,
            max_new_tokens: raw.generation.max_new_tokens.unwrap_or(defaults.max_new_tokens),
            num_return_sequences: raw.generation.num_return_sequences.unwrap_or(beam_size),
            echo_input: raw.generation.echo_input.unwrap_or(false),
        };
        generation.validate().map_err(PipelineError::from)?;

        let backend = match raw.backend.kind.as_deref().unwrap_or("mock-oracle") {
            "mock-oracle" => BackendSpec::MockOracle { noise_rank: raw.backend.noise_rank },
            "echo" => BackendSpec::Echo,
            "http" => {
                let url = std::env::var(BACKEND_URL_ENV).ok().or(raw.backend.url).ok_or_else(
                    || {
                        PipelineError::Config(format!(
                            "http backend needs backend.url or {BACKEND_URL_ENV}"
                        ))
                    },
                )?;
                let token = std::env::var(BACKEND_TOKEN_ENV).ok().or(raw.backend.token);
                BackendSpec::Http {
                    url,
                    token,
                    chunk_size: raw.backend.chunk_size.unwrap_or(DEFAULT_CHUNK_SIZE),
                    max_retries: raw.backend.max_retries.unwrap_or(3),
                }
            }
            other => {
                return Err(PipelineError::Config(format!(
                    "unknown backend kind {other:?} (expected mock-oracle, echo or http)"
                )))
            }
        };

        let eval = EvalConfig { ks: raw.eval.ks.unwrap_or_else(|| EvalConfig::default().ks) };
        eval.validate().map_err(PipelineError::from)?;

        Ok(RunConfig {
            pair,
            aux_vectors: PathBuf::from(raw.data.aux_vectors),
            tgt_vectors: PathBuf::from(raw.data.tgt_vectors),
            seed_lexicon: PathBuf::from(raw.data.seed_lexicon),
            test_lexicon: PathBuf::from(raw.data.test_lexicon),
            trim: raw.data.trim.unwrap_or(DEFAULT_TRIM),
            template,
            zero_shot_template_id: raw.prompt.zero_shot_template_id,
            prompt,
            generation,
            backend,
            eval,
            out_dir: PathBuf::from(raw.output.dir),
        })
    }

    /// Look up the configured template: explicit id, or the model family's
    /// best template for the shot kind implied by n_shots.
    pub fn resolve_template<'c>(
        &self,
        catalog: &'c TemplateCatalog,
    ) -> Result<&'c Template, PipelineError> {
        let shot_kind = if self.prompt.n_shots == 0 {
            ShotKind::ZeroShot
        } else {
            ShotKind::FewShot
        };
        let template = match &self.template {
            TemplateChoice::Id(id) => catalog
                .get(*id)
                .ok_or_else(|| PipelineError::Config(format!("template {id} not in catalog")))?,
            TemplateChoice::Model(model) => catalog.best_template(model, shot_kind)?,
        };
        if template.shot_kind != shot_kind {
            return Err(PipelineError::Config(format!(
                "template {} is {} but the prompt config implies {} (n_shots = {}, selection = {})",
                template.id,
                template.shot_kind.label(),
                shot_kind.label(),
                self.prompt.n_shots,
                self.prompt.selection_mode.name(),
            )));
        }
        Ok(template)
    }

    /// Structural checks that need no file I/O beyond existence tests.
    pub fn validate(&self, catalog: &TemplateCatalog) -> Result<(), PipelineError> {
        self.prompt.validate()?;
        self.generation.validate()?;
        self.eval.validate()?;
        self.resolve_template(catalog)?;
        let missing: Vec<String> = [
            &self.aux_vectors,
            &self.tgt_vectors,
            &self.seed_lexicon,
            &self.test_lexicon,
        ]
        .iter()
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
        if !missing.is_empty() {
            return Err(PipelineError::Config(format!(
                "missing input files: {}",
                missing.join(", ")
            )));
        }
        Ok(())
    }
}
