//! Pipeline orchestration: load data, build prompts, call the backend,
//! extract, score — leaving re-loadable artifacts and a manifest behind.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{BackendSpec, PipelineError, RunConfig, TemplateChoice};
use crate::embeddings::{load_vec, EmbeddingStore};
use crate::eval::{chi_square_compare, score, EvalReport};
use crate::extraction::{
    extract, special_token_profile, write_predictions_jsonl, write_predictions_tsv, Prediction,
};
use crate::generation::{Backend, EchoBackend, HttpBackend, HttpBackendConfig, MockOracleBackend};
use crate::lexicon::{check_disjoint, gold_map, load_lexicon, Lexicon, LexiconRole};
use crate::prompts::{render, select_examples, PromptConfig, PromptInstance, Selection};
use crate::templates::{ShotKind, Template, TemplateCatalog};

pub const PROMPTS_FILE: &str = "prompts.jsonl";
pub const BEAMS_FILE: &str = "beams.jsonl";
pub const PREDICTIONS_TSV: &str = "predictions.tsv";
pub const PREDICTIONS_JSONL: &str = "predictions.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_FILE: &str = "sweep.csv";

/// One JSON value per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> std::io::Result<Vec<T>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut items = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line)?);
    }
    Ok(items)
}

/// Progress record persisted after every stage so an interrupted or failed
/// run leaves behind a machine-readable account of which artifacts are valid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub status: String,
    pub stage: String,
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    fn path(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_FILE)
    }

    fn start(dir: &Path) -> Result<Self, PipelineError> {
        let manifest = Manifest {
            status: "running".into(),
            stage: "init".into(),
            artifacts: vec![],
            error: None,
        };
        manifest.persist(dir)?;
        Ok(manifest)
    }

    fn persist(&self, dir: &Path) -> Result<(), PipelineError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        std::fs::write(Self::path(dir), json)?;
        Ok(())
    }

    fn advance(&mut self, dir: &Path, stage: &str, artifact: Option<&str>) -> Result<(), PipelineError> {
        self.stage = stage.to_string();
        if let Some(name) = artifact {
            self.artifacts.push(name.to_string());
        }
        self.persist(dir)
    }

    fn complete(&mut self, dir: &Path) -> Result<(), PipelineError> {
        self.status = "complete".into();
        self.persist(dir)
    }

    fn fail(&mut self, dir: &Path, error: &PipelineError) {
        self.status = "failed".into();
        self.error = Some(error.to_string());
        // best effort: the original error matters more than manifest I/O
        let _ = self.persist(dir);
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(Self::path(dir))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Data(e.to_string()))
    }
}

pub struct PipelineData {
    pub aux: EmbeddingStore,
    pub tgt: EmbeddingStore,
    pub seed: Lexicon,
    pub test: Lexicon,
}

pub fn load_data(cfg: &RunConfig) -> Result<PipelineData, PipelineError> {
    let aux = load_vec(&cfg.aux_vectors, cfg.trim, true)?;
    let tgt = load_vec(&cfg.tgt_vectors, cfg.trim, true)?;
    let seed = load_lexicon(&cfg.seed_lexicon, cfg.pair.clone(), LexiconRole::Seed)?;
    let test = load_lexicon(&cfg.test_lexicon, cfg.pair.clone(), LexiconRole::Test)?;
    if !check_disjoint(&seed, &test)? {
        log::warn!("seed and test lexicons share translation pairs; scores will be inflated");
    }
    Ok(PipelineData { aux, tgt, seed, test })
}

/// Distinct test queries in file order.
fn test_queries(test: &Lexicon) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    test.entries
        .iter()
        .filter(|e| seen.insert(e.source.as_str()))
        .map(|e| e.source.clone())
        .collect()
}

/// One prompt per distinct test query. The query itself is always excluded
/// from example candidates (a no-op when seed and test are disjoint).
pub fn build_prompt_set(
    cfg: &RunConfig,
    template: &Template,
    data: &PipelineData,
) -> Result<Vec<PromptInstance>, PipelineError> {
    let queries = test_queries(&data.test);
    let mut prompts = Vec::with_capacity(queries.len());
    for (i, query) in queries.iter().enumerate() {
        let selection = if cfg.prompt.n_shots == 0 {
            Selection::empty()
        } else {
            select_examples(query, &data.seed, &data.aux, Some(&data.tgt), &cfg.prompt, true)?
        };
        let mut prompt = render(template, &cfg.pair, query, &selection, &cfg.prompt)?;
        prompt.id = i;
        prompts.push(prompt);
    }
    Ok(prompts)
}

/// First gold translation per query, for closing the loop without a real LLM.
fn oracle_gold(test: &Lexicon) -> HashMap<String, String> {
    gold_map(test)
        .into_iter()
        .filter_map(|(q, ts)| ts.into_iter().next().map(|t| (q, t)))
        .collect()
}

pub fn build_backend(
    spec: &BackendSpec,
    test: &Lexicon,
) -> Result<Box<dyn Backend>, PipelineError> {
    Ok(match spec {
        BackendSpec::MockOracle { noise_rank } => {
            Box::new(MockOracleBackend::new(oracle_gold(test), *noise_rank))
        }
        BackendSpec::Echo => Box::new(EchoBackend),
        BackendSpec::Http { url, token, chunk_size, max_retries } => {
            let mut http = HttpBackendConfig::new(url.clone());
            http.token = token.clone();
            http.chunk_size = *chunk_size;
            http.max_retries = *max_retries;
            Box::new(HttpBackend::new(http)?)
        }
    })
}

fn special_tokens_for(cfg: &RunConfig) -> Vec<String> {
    match &cfg.template {
        TemplateChoice::Model(model) => special_token_profile(model),
        TemplateChoice::Id(_) => special_token_profile("generic"),
    }
}

pub fn extract_all(
    cfg: &RunConfig,
    prompts: &[PromptInstance],
    beams: &[crate::generation::BeamResult],
    tgt: &EmbeddingStore,
) -> Vec<Prediction> {
    let special = special_tokens_for(cfg);
    prompts
        .iter()
        .zip(beams)
        .map(|(p, b)| extract(b, p, tgt, &cfg.generation, &special))
        .collect()
}

/// Run the whole pipeline, leaving prompts.jsonl, beams.jsonl,
/// predictions.tsv/.jsonl, report.json and a manifest in the output
/// directory. Validation (including template/selection compatibility) happens
/// before anything touches the backend; on failure the manifest records the
/// stage that broke and which artifacts are still trustworthy.
pub fn run_pipeline(cfg: &RunConfig) -> Result<EvalReport, PipelineError> {
    let catalog = TemplateCatalog::builtin();
    cfg.validate(catalog)?;
    let template = cfg.resolve_template(catalog)?;

    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut manifest = Manifest::start(&cfg.out_dir)?;
    match run_stages(cfg, template, &mut manifest) {
        Ok(report) => {
            manifest.complete(&cfg.out_dir)?;
            Ok(report)
        }
        Err(e) => {
            manifest.fail(&cfg.out_dir, &e);
            Err(e)
        }
    }
}

fn run_stages(
    cfg: &RunConfig,
    template: &Template,
    manifest: &mut Manifest,
) -> Result<EvalReport, PipelineError> {
    let dir = &cfg.out_dir;
    let data = load_data(cfg)?;
    manifest.advance(dir, "load", None)?;

    let prompts = build_prompt_set(cfg, template, &data)?;
    write_jsonl(&dir.join(PROMPTS_FILE), &prompts)?;
    manifest.advance(dir, "prompts", Some(PROMPTS_FILE))?;

    let backend = build_backend(&cfg.backend, &data.test)?;
    let beams = backend.generate(&prompts, &cfg.generation)?;
    write_jsonl(&dir.join(BEAMS_FILE), &beams)?;
    manifest.advance(dir, "generate", Some(BEAMS_FILE))?;

    let predictions = extract_all(cfg, &prompts, &beams, &data.tgt);
    write_predictions_tsv(&dir.join(PREDICTIONS_TSV), &predictions)?;
    write_predictions_jsonl(&dir.join(PREDICTIONS_JSONL), &predictions)?;
    manifest.advance(dir, "extract", Some(PREDICTIONS_TSV))?;
    manifest.advance(dir, "extract", Some(PREDICTIONS_JSONL))?;

    let report = score(&predictions, &gold_map(&data.test), &cfg.eval)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| PipelineError::Data(e.to_string()))?;
    std::fs::write(dir.join(REPORT_FILE), json)?;
    manifest.advance(dir, "evaluate", Some(REPORT_FILE))?;
    Ok(report)
}

/// Derive the per-n config for a shot sweep: n = 0 switches to no selection
/// and the zero-shot template (zero_shot_template_id, or the model family's
/// zero-shot pick); n > 0 keeps the configured few-shot setup.
fn sweep_point_config(cfg: &RunConfig, n: usize) -> Result<RunConfig, PipelineError> {
    use crate::prompts::SelectionMode;
    let mut point = cfg.clone();
    point.prompt.n_shots = n;
    point.out_dir = cfg.out_dir.join(format!("n{n}"));
    if n == 0 {
        point.prompt.selection_mode = SelectionMode::None;
        if let TemplateChoice::Id(id) = &cfg.template {
            let id = *id;
            let zero_ok = TemplateCatalog::builtin()
                .get(id)
                .is_some_and(|t| t.shot_kind == ShotKind::ZeroShot);
            if !zero_ok {
                let fallback = cfg.zero_shot_template_id.ok_or_else(|| {
                    PipelineError::Config(format!(
                        "sweep includes n=0 but template {id} is few-shot; \
                         set prompt.zero_shot_template_id or use model_family"
                    ))
                })?;
                point.template = TemplateChoice::Id(fallback);
            }
        }
    } else if point.prompt.selection_mode == SelectionMode::None {
        point.prompt.selection_mode = SelectionMode::Nearest;
    }
    Ok(point)
}

/// One pipeline run per shot count; returns the CSV (`n,p_at_1,p_at_5`) and
/// writes it to sweep.csv under the output directory.
pub fn sweep_shots(cfg: &RunConfig, n_values: &[usize]) -> Result<String, PipelineError> {
    if n_values.is_empty() {
        return Err(PipelineError::Config("sweep needs at least one n value".into()));
    }
    let mut csv = String::from("n,p_at_1,p_at_5\n");
    for &n in n_values {
        let mut point = sweep_point_config(cfg, n)?;
        // the sweep schema needs both K values regardless of the base config
        for k in [1usize, 5] {
            if !point.eval.ks.contains(&k) {
                point.eval.ks.push(k);
            }
        }
        point.eval.ks.sort_unstable();
        let report = run_pipeline(&point)?;
        csv.push_str(&format!(
            "{n},{:.6},{:.6}\n",
            report.p_at_k[&1], report.p_at_k[&5]
        ));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join(SWEEP_FILE), &csv)?;
    Ok(csv)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub prompt: String,
    pub completion: String,
}

/// Write one {prompt, completion} record per seed pair, with the pair's own
/// source always excluded from its in-context examples. Multi-gold sources
/// yield one record per target. Returns the record count.
pub fn export_finetune_data(
    seed: &Lexicon,
    aux_store: &EmbeddingStore,
    tgt_store: &EmbeddingStore,
    template: &Template,
    cfg: &PromptConfig,
    out: &Path,
) -> Result<usize, PipelineError> {
    if template.shot_kind != ShotKind::FewShot {
        return Err(PipelineError::Config(format!(
            "fine-tune export needs a few-shot template; template {} is zero-shot",
            template.id
        )));
    }
    cfg.validate()?;
    let mut records = Vec::with_capacity(seed.entries.len());
    for entry in &seed.entries {
        let selection =
            select_examples(&entry.source, seed, aux_store, Some(tgt_store), cfg, true)?;
        let prompt = render(template, &seed.pair, &entry.source, &selection, cfg)?;
        records.push(FinetuneRecord {
            prompt: prompt.rendered,
            completion: entry.target.clone(),
        });
    }
    write_jsonl(out, &records)?;
    Ok(records.len())
}

fn read_report(path: &Path) -> Result<EvalReport, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Data(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        PipelineError::Data(format!("report schema mismatch in {}: {e}", path.display()))
    })
}

/// χ² comparison of two persisted reports on pooled correct@1 counts.
pub fn significance_from_reports(
    report_a: &Path,
    report_b: &Path,
) -> Result<(f64, f64), PipelineError> {
    let a = read_report(report_a)?;
    let b = read_report(report_b)?;
    if a.n_items == 0 || b.n_items == 0 {
        return Err(PipelineError::Data("cannot compare empty reports".into()));
    }
    Ok(chi_square_compare(
        a.correct_at_1() as u64,
        a.n_items as u64,
        b.correct_at_1() as u64,
        b.n_items as u64,
    )?)
}
