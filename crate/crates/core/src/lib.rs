//! Bilingual lexicon induction by prompting text-generation models, with
//! retrieval-augmented in-context examples drawn from a seed dictionary.
//!
//! The pipeline: load word embeddings and lexicons, pick in-context examples
//! for each query by nearest-neighbour search, render prompts from a template
//! catalog, collect beam-search outputs from a pluggable backend, extract the
//! first in-vocabulary word per query, and score with P@K / MRR. An
//! orthogonal-mapping baseline and a χ² significance test round out the
//! experiment tooling.

pub mod config;
pub mod embeddings;
pub mod eval;
pub mod extraction;
pub mod generation;
pub mod lexicon;
pub mod pipeline;
pub mod procrustes;
pub mod prompts;
pub mod retrieval;
pub mod templates;

pub use config::{PipelineError, RunConfig};
pub use embeddings::EmbeddingStore;
pub use eval::EvalReport;
pub use extraction::Prediction;
pub use generation::{Backend, BeamResult, GenerationParams};
pub use lexicon::{LanguagePair, Lexicon};
pub use prompts::PromptInstance;
pub use templates::TemplateCatalog;
