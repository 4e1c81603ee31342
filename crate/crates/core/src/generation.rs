//! Text-generation backend contract: beam-searched ranked sequences per
//! prompt, with a deterministic mock oracle for tests and a generic HTTP
//! client for real LLM servers.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompts::PromptInstance;

pub const DEFAULT_BEAM_SIZE: usize = 5;
pub const DEFAULT_MAX_NEW_TOKENS: usize = 5;
pub const DEFAULT_CHUNK_SIZE: usize = 8;

pub const BACKEND_URL_ENV: &str = "BLI_BACKEND_URL";
pub const BACKEND_TOKEN_ENV: &str = "BLI_BACKEND_TOKEN";

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    BackendUnavailable { attempts: usize, message: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("invalid generation params: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub beam_size: usize,
    pub max_new_tokens: usize,
    pub num_return_sequences: usize,
    /// Decoder-only-style backends repeat the prompt before the continuation.
    pub echo_input: bool,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            beam_size: DEFAULT_BEAM_SIZE,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            num_return_sequences: DEFAULT_BEAM_SIZE,
            echo_input: false,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.beam_size == 0 || self.max_new_tokens == 0 || self.num_return_sequences == 0 {
            return Err(GenerationError::InvalidParams(
                "beam_size, max_new_tokens and num_return_sequences must be positive".into(),
            ));
        }
        if self.num_return_sequences > self.beam_size {
            return Err(GenerationError::InvalidParams(format!(
                "num_return_sequences {} exceeds beam_size {}",
                self.num_return_sequences, self.beam_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSequence {
    pub text: String,
    /// Log-probability-like value; only the ordering within one prompt matters.
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BeamResult {
    /// Best first; scores non-increasing.
    pub sequences: Vec<ScoredSequence>,
}

impl BeamResult {
    pub fn scores_non_increasing(&self) -> bool {
        self.sequences.windows(2).all(|w| w[0].score >= w[1].score)
    }
}

/// A text-generation service. Implementations must be safe for concurrent
/// `generate` calls and must return one result per prompt, in input order.
pub trait Backend: Send + Sync {
    fn generate(
        &self,
        prompts: &[PromptInstance],
        params: &GenerationParams,
    ) -> Result<Vec<BeamResult>, GenerationError>;
}

fn junk_token(rank: usize) -> String {
    format!("qzxqzx{rank}")
}

/// Deterministic dictionary oracle: the gold translation of a prompt's query
/// surfaces at beam rank 1 (or at `noise_rank`, below out-of-vocabulary junk)
/// and every other beam holds junk. Queries absent from the map yield junk
/// everywhere.
pub struct MockOracleBackend {
    gold: HashMap<String, String>,
    noise_rank: Option<usize>,
}

impl MockOracleBackend {
    pub fn new(gold: HashMap<String, String>, noise_rank: Option<usize>) -> Self {
        Self { gold, noise_rank }
    }

    fn beams_for(&self, prompt: &PromptInstance, params: &GenerationParams) -> BeamResult {
        let gold = self
            .gold
            .get(&prompt.query)
            .or_else(|| self.gold.get(&prompt.query.to_lowercase()));
        let gold_rank = self.noise_rank.unwrap_or(1);
        let sequences = (1..=params.num_return_sequences)
            .map(|rank| {
                let body = match gold {
                    Some(word) if rank == gold_rank => word.clone(),
                    _ => junk_token(rank),
                };
                let text = if params.echo_input {
                    format!("{} {}", prompt.rendered, body)
                } else {
                    body
                };
                ScoredSequence { text, score: -(rank as f64) }
            })
            .collect();
        BeamResult { sequences }
    }
}

impl Backend for MockOracleBackend {
    fn generate(
        &self,
        prompts: &[PromptInstance],
        params: &GenerationParams,
    ) -> Result<Vec<BeamResult>, GenerationError> {
        params.validate()?;
        Ok(prompts.iter().map(|p| self.beams_for(p, params)).collect())
    }
}

/// Repeats each rendered prompt as every sequence, with a per-rank suffix.
pub struct EchoBackend;

impl Backend for EchoBackend {
    fn generate(
        &self,
        prompts: &[PromptInstance],
        params: &GenerationParams,
    ) -> Result<Vec<BeamResult>, GenerationError> {
        params.validate()?;
        Ok(prompts
            .iter()
            .map(|p| BeamResult {
                sequences: (1..=params.num_return_sequences)
                    .map(|rank| ScoredSequence {
                        text: format!("{} echo{rank}", p.rendered),
                        score: -(rank as f64),
                    })
                    .collect(),
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    pub url: String,
    pub token: Option<String>,
    /// Prompts per request; decoder-only-style servers may need 1.
    pub chunk_size: usize,
    /// Additional attempts after the first on transient failure.
    pub max_retries: usize,
    pub initial_backoff: Duration,
    pub request_timeout: Duration,
}

impl HttpBackendConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            token: None,
            chunk_size: DEFAULT_CHUNK_SIZE,
            max_retries: 3,
            initial_backoff: Duration::from_millis(250),
            request_timeout: Duration::from_secs(120),
        }
    }

    /// Reads `BLI_BACKEND_URL` (required) and `BLI_BACKEND_TOKEN` (optional).
    pub fn from_env() -> Result<Self, GenerationError> {
        let url = std::env::var(BACKEND_URL_ENV).map_err(|_| {
            GenerationError::InvalidParams(format!("{BACKEND_URL_ENV} is not set"))
        })?;
        let mut cfg = Self::new(url);
        cfg.token = std::env::var(BACKEND_TOKEN_ENV).ok();
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    prompts: Vec<&'a str>,
    beam_size: usize,
    max_new_tokens: usize,
    num_return_sequences: usize,
}

#[derive(Deserialize)]
struct WireSequence {
    text: String,
    score: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    results: Vec<Vec<WireSequence>>,
}

/// Client for the JSON wire protocol:
/// request `{"prompts":[...],"beam_size":B,"max_new_tokens":M,"num_return_sequences":R}`,
/// response `{"results":[[{"text":...,"score":...},...],...]}`.
///
/// Prompts are sent in fixed-size chunks, strictly in order, so result `i`
/// always corresponds to prompt `i`. Transient transport failures (connect
/// errors, timeouts, HTTP 408/429/5xx) are retried with doubling backoff up
/// to the configured budget.
pub struct HttpBackend {
    cfg: HttpBackendConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(cfg: HttpBackendConfig) -> Result<Self, GenerationError> {
        if cfg.chunk_size == 0 {
            return Err(GenerationError::InvalidParams("chunk_size must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.request_timeout)
            .build()
            .map_err(|e| GenerationError::BackendUnavailable {
                attempts: 0,
                message: format!("building HTTP client: {e}"),
            })?;
        Ok(Self { cfg, client })
    }

    pub fn from_env() -> Result<Self, GenerationError> {
        Self::new(HttpBackendConfig::from_env()?)
    }

    fn post_chunk(
        &self,
        chunk: &[PromptInstance],
        params: &GenerationParams,
    ) -> Result<Vec<BeamResult>, GenerationError> {
        let request = WireRequest {
            prompts: chunk.iter().map(|p| p.rendered.as_str()).collect(),
            beam_size: params.beam_size,
            max_new_tokens: params.max_new_tokens,
            num_return_sequences: params.num_return_sequences,
        };
        let attempts_budget = self.cfg.max_retries + 1;
        let mut backoff = self.cfg.initial_backoff;
        let mut last_error = String::new();
        for attempt in 1..=attempts_budget {
            if attempt > 1 {
                std::thread::sleep(backoff);
                backoff = backoff.saturating_mul(2);
            }
            let mut req = self.client.post(&self.cfg.url).json(&request);
            if let Some(token) = &self.cfg.token {
                req = req.bearer_auth(token);
            }
            let response = match req.send() {
                Ok(r) => r,
                Err(e) => {
                    last_error = format!("transport: {e}");
                    continue;
                }
            };
            let status = response.status();
            if status.is_success() {
                let wire: WireResponse = response.json().map_err(|e| {
                    GenerationError::MalformedResponse(format!("decoding JSON: {e}"))
                })?;
                return Self::check_shape(wire, chunk.len(), params);
            }
            let transient = status.as_u16() == 408
                || status.as_u16() == 429
                || status.is_server_error();
            if transient {
                last_error = format!("HTTP {status}");
                continue;
            }
            return Err(GenerationError::BackendUnavailable {
                attempts: attempt,
                message: format!("HTTP {status}"),
            });
        }
        Err(GenerationError::BackendUnavailable {
            attempts: attempts_budget,
            message: last_error,
        })
    }

    fn check_shape(
        wire: WireResponse,
        expected: usize,
        params: &GenerationParams,
    ) -> Result<Vec<BeamResult>, GenerationError> {
        if wire.results.len() != expected {
            return Err(GenerationError::MalformedResponse(format!(
                "{} results for {} prompts",
                wire.results.len(),
                expected
            )));
        }
        wire.results
            .into_iter()
            .map(|seqs| {
                if seqs.len() != params.num_return_sequences {
                    return Err(GenerationError::MalformedResponse(format!(
                        "{} sequences per prompt, expected {}",
                        seqs.len(),
                        params.num_return_sequences
                    )));
                }
                let beam = BeamResult {
                    sequences: seqs
                        .into_iter()
                        .map(|s| ScoredSequence { text: s.text, score: s.score })
                        .collect(),
                };
                if !beam.scores_non_increasing() {
                    return Err(GenerationError::MalformedResponse(
                        "beam scores are not non-increasing".into(),
                    ));
                }
                Ok(beam)
            })
            .collect()
    }
}

impl Backend for HttpBackend {
    fn generate(
        &self,
        prompts: &[PromptInstance],
        params: &GenerationParams,
    ) -> Result<Vec<BeamResult>, GenerationError> {
        params.validate()?;
        let mut out = Vec::with_capacity(prompts.len());
        for chunk in prompts.chunks(self.cfg.chunk_size) {
            out.extend(self.post_chunk(chunk, params)?);
        }
        Ok(out)
    }
}
