use std::collections::HashSet;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use bli_core::config::{PipelineError, RunConfig};
use bli_core::embeddings::{load_vec, DEFAULT_TRIM};
use bli_core::eval::{score, significance_label, EvalConfig};
use bli_core::extraction::{
    read_predictions_jsonl, write_predictions_jsonl, write_predictions_tsv, Prediction,
};
use bli_core::generation::BeamResult;
use bli_core::lexicon::{gold_map, load_lexicon, LanguagePair, LanguageTable, LexiconRole};
use bli_core::pipeline::{
    build_backend, build_prompt_set, export_finetune_data, extract_all, load_data, read_jsonl,
    run_pipeline, significance_from_reports, sweep_shots, write_jsonl, BEAMS_FILE,
    PREDICTIONS_JSONL, PREDICTIONS_TSV, PROMPTS_FILE, REPORT_FILE,
};
use bli_core::procrustes::{
    fit_procrustes, MappingMatrix, RetrievalMethod, Translator,
};
use bli_core::prompts::PromptInstance;
use bli_core::retrieval::top_k_cosine;
use bli_core::templates::TemplateCatalog;

#[derive(Parser)]
#[command(
    name = "bli",
    version,
    about = "Bilingual lexicon induction via retrieval-augmented prompting"
)]
struct Cli {
    /// Repeat for more logging (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an embedding file and report its shape
    LoadEmbeddings {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRIM)]
        trim: usize,
        /// Keep raw magnitudes instead of L2-normalizing
        #[arg(long)]
        no_normalize: bool,
        #[arg(long)]
        json: bool,
    },
    /// Nearest neighbours of a word within one embedding space
    Retrieve {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(short, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_TRIM)]
        trim: usize,
        /// Drop the query word itself from the neighbour list
        #[arg(long)]
        exclude_self: bool,
    },
    /// Render prompts for every test query (never contacts a backend)
    BuildPrompts {
        #[arg(long)]
        config: PathBuf,
    },
    /// Send prompts.jsonl to the configured backend, writing beams.jsonl
    Generate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Turn beams.jsonl into predictions.tsv / predictions.jsonl
    Extract {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score predictions.jsonl against the test lexicon
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Full run: load, prompts, generation, extraction, report
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the pipeline once per shot count and emit n,p_at_1,p_at_5 CSV
    SweepShots {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated shot counts, e.g. 0,1,3,5,10
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
    },
    /// Export {prompt, completion} fine-tuning records from the seed lexicon
    ExportFtData {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to <output.dir>/finetune.jsonl
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chi-square comparison of two report.json files
    Significance {
        report_a: PathBuf,
        report_b: PathBuf,
    },
    /// Fit the orthogonal baseline mapping from seed pairs
    BaselineFit {
        #[arg(long)]
        src_vectors: PathBuf,
        #[arg(long)]
        tgt_vectors: PathBuf,
        #[arg(long)]
        seed_lexicon: PathBuf,
        #[arg(long)]
        src_lang: String,
        #[arg(long)]
        tgt_lang: String,
        #[arg(long, default_value_t = DEFAULT_TRIM)]
        trim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Translate with a fitted mapping: one query, or a whole test lexicon
    BaselineTranslate {
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        src_vectors: PathBuf,
        #[arg(long)]
        tgt_vectors: PathBuf,
        #[arg(long)]
        query: Option<String>,
        /// Test lexicon to score instead of a single query
        #[arg(long)]
        test_lexicon: Option<PathBuf>,
        #[arg(long, default_value = "cosine")]
        method: String,
        #[arg(short, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = bli_core::retrieval::DEFAULT_K_CSLS)]
        k_csls: usize,
        /// Cap on mapped source rows feeding the CSLS penalty table
        #[arg(long)]
        csls_background: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_TRIM)]
        trim: usize,
        #[arg(long, default_value = "xx")]
        src_lang: String,
        #[arg(long, default_value = "yy")]
        tgt_lang: String,
        /// Write the eval report here (test-lexicon mode only)
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

/// Languages outside the built-in table fall back to their code as the name.
fn lang_pair(src: &str, tgt: &str) -> Result<LanguagePair, PipelineError> {
    let mut table = LanguageTable::builtin();
    if table.name(src).is_none() {
        table.insert(src, src);
    }
    if table.name(tgt).is_none() {
        table.insert(tgt, tgt);
    }
    LanguagePair::new(src, tgt, &table).map_err(|e| PipelineError::Config(e.to_string()))
}

fn parse_method(name: &str, k_csls: usize) -> Result<RetrievalMethod, PipelineError> {
    match name {
        "cosine" => Ok(RetrievalMethod::Cosine),
        "csls" => Ok(RetrievalMethod::Csls { k_csls }),
        other => Err(PipelineError::Config(format!(
            "unknown retrieval method {other:?} (expected cosine or csls)"
        ))),
    }
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::LoadEmbeddings { vectors, trim, no_normalize, json } => {
            let store = load_vec(&vectors, trim, !no_normalize)?;
            if json {
                println!(
                    "{}",
                    serde_json::json!({
                        "path": vectors.display().to_string(),
                        "tokens": store.len(),
                        "dim": store.dim(),
                        "normalized": store.normalized(),
                        "skipped_duplicates": store.skipped_duplicates,
                    })
                );
            } else {
                println!(
                    "{}: {} tokens, dim {}, {} duplicates skipped, normalized: {}",
                    vectors.display(),
                    store.len(),
                    store.dim(),
                    store.skipped_duplicates,
                    store.normalized(),
                );
            }
            Ok(())
        }
        Command::Retrieve { vectors, query, k, trim, exclude_self } => {
            let store = load_vec(&vectors, trim, true)?;
            let idx = store
                .frequency_rank(&query)
                .or_else(|| store.rank_of_lowercase(&query.to_lowercase()))
                .ok_or_else(|| {
                    PipelineError::Data(format!("query {query:?} not in {}", vectors.display()))
                })?;
            let exclude: HashSet<usize> =
                if exclude_self { HashSet::from([idx]) } else { HashSet::new() };
            let query_row = store.row(idx).to_vec();
            for n in top_k_cosine(&store, &query_row, k, &exclude)? {
                println!("{}\t{:.6}", store.token(n.index), n.score);
            }
            Ok(())
        }
        Command::BuildPrompts { config } => {
            let cfg = RunConfig::from_path(&config)?;
            let catalog = TemplateCatalog::builtin();
            cfg.validate(catalog)?;
            let template = cfg.resolve_template(catalog)?;
            let data = load_data(&cfg)?;
            let prompts = build_prompt_set(&cfg, template, &data)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg.out_dir.join(PROMPTS_FILE);
            write_jsonl(&path, &prompts)?;
            println!("{} prompts -> {}", prompts.len(), path.display());
            Ok(())
        }
        Command::Generate { config } => {
            let cfg = RunConfig::from_path(&config)?;
            let prompts: Vec<PromptInstance> = read_jsonl(&cfg.out_dir.join(PROMPTS_FILE))?;
            let test = load_lexicon(&cfg.test_lexicon, cfg.pair.clone(), LexiconRole::Test)?;
            let backend = build_backend(&cfg.backend, &test)?;
            let beams = backend.generate(&prompts, &cfg.generation)?;
            let path = cfg.out_dir.join(BEAMS_FILE);
            write_jsonl(&path, &beams)?;
            println!("{} beam results -> {}", beams.len(), path.display());
            Ok(())
        }
        Command::Extract { config } => {
            let cfg = RunConfig::from_path(&config)?;
            let prompts: Vec<PromptInstance> = read_jsonl(&cfg.out_dir.join(PROMPTS_FILE))?;
            let beams: Vec<BeamResult> = read_jsonl(&cfg.out_dir.join(BEAMS_FILE))?;
            if prompts.len() != beams.len() {
                return Err(PipelineError::Data(format!(
                    "{} prompts vs {} beam results",
                    prompts.len(),
                    beams.len()
                )));
            }
            let tgt = load_vec(&cfg.tgt_vectors, cfg.trim, true)?;
            let predictions = extract_all(&cfg, &prompts, &beams, &tgt);
            write_predictions_tsv(&cfg.out_dir.join(PREDICTIONS_TSV), &predictions)?;
            write_predictions_jsonl(&cfg.out_dir.join(PREDICTIONS_JSONL), &predictions)?;
            let hits = predictions.iter().filter(|p| p.predicted.is_some()).count();
            println!(
                "{} predictions ({} non-empty) -> {}",
                predictions.len(),
                hits,
                cfg.out_dir.join(PREDICTIONS_JSONL).display()
            );
            Ok(())
        }
        Command::Evaluate { config } => {
            let cfg = RunConfig::from_path(&config)?;
            let predictions = read_predictions_jsonl(&cfg.out_dir.join(PREDICTIONS_JSONL))?;
            let test = load_lexicon(&cfg.test_lexicon, cfg.pair.clone(), LexiconRole::Test)?;
            let report = score(&predictions, &gold_map(&test), &cfg.eval)?;
            let path = cfg.out_dir.join(REPORT_FILE);
            std::fs::write(
                &path,
                serde_json::to_string_pretty(&report)
                    .map_err(|e| PipelineError::Data(e.to_string()))?,
            )?;
            print!("{}", report.text_table());
            println!("report -> {}", path.display());
            Ok(())
        }
        Command::Pipeline { config } => {
            let cfg = RunConfig::from_path(&config)?;
            let report = run_pipeline(&cfg)?;
            print!("{}", report.text_table());
            println!("artifacts -> {}", cfg.out_dir.display());
            Ok(())
        }
        Command::SweepShots { config, n } => {
            let cfg = RunConfig::from_path(&config)?;
            let csv = sweep_shots(&cfg, &n)?;
            print!("{csv}");
            Ok(())
        }
        Command::ExportFtData { config, out } => {
            let cfg = RunConfig::from_path(&config)?;
            let catalog = TemplateCatalog::builtin();
            let template = cfg.resolve_template(catalog)?;
            let data = load_data(&cfg)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let out = out.unwrap_or_else(|| cfg.out_dir.join("finetune.jsonl"));
            let count = export_finetune_data(
                &data.seed,
                &data.aux,
                &data.tgt,
                template,
                &cfg.prompt,
                &out,
            )?;
            println!("{count} records -> {}", out.display());
            Ok(())
        }
        Command::Significance { report_a, report_b } => {
            let (chi2, p) = significance_from_reports(&report_a, &report_b)?;
            println!("chi2 = {chi2:.6}");
            println!("p = {p:.6e}");
            match significance_label(p) {
                Some(label) => println!("{label}"),
                None => println!("not significant at p < 0.05"),
            }
            Ok(())
        }
        Command::BaselineFit {
            src_vectors,
            tgt_vectors,
            seed_lexicon,
            src_lang,
            tgt_lang,
            trim,
            out,
        } => {
            let src = load_vec(&src_vectors, trim, true)?;
            let tgt = load_vec(&tgt_vectors, trim, true)?;
            let pair = lang_pair(&src_lang, &tgt_lang)?;
            let seed = load_lexicon(&seed_lexicon, pair, LexiconRole::Seed)?;
            let mapping = fit_procrustes(&src, &tgt, &seed)?;
            mapping.save(&out)?;
            println!(
                "mapping dim {} (orthogonality residual {:.2e}) -> {}",
                mapping.dim(),
                mapping.orthogonality_error(),
                out.display()
            );
            Ok(())
        }
        Command::BaselineTranslate {
            mapping,
            src_vectors,
            tgt_vectors,
            query,
            test_lexicon,
            method,
            k,
            k_csls,
            csls_background,
            trim,
            src_lang,
            tgt_lang,
            report,
        } => {
            let mapping = MappingMatrix::load(&mapping)?;
            let src = load_vec(&src_vectors, trim, true)?;
            let tgt = load_vec(&tgt_vectors, trim, true)?;
            let method = parse_method(&method, k_csls)?;
            let translator = Translator::new(&mapping, &src, &tgt, method, csls_background)?;
            match (query, test_lexicon) {
                (Some(word), None) => {
                    for (token, score) in translator.translate(&word, k)? {
                        println!("{token}\t{score:.6}");
                    }
                    Ok(())
                }
                (None, Some(path)) => {
                    let pair = lang_pair(&src_lang, &tgt_lang)?;
                    let test = load_lexicon(&path, pair, LexiconRole::Test)?;
                    let gold = gold_map(&test);
                    let queries: Vec<String> = gold.keys().cloned().collect();
                    let predictions: Vec<Prediction> = translator
                        .translate_batch(&queries, k)
                        .into_iter()
                        .zip(&queries)
                        .map(|(result, q)| match result {
                            Ok(hits) => {
                                let candidates: Vec<String> =
                                    hits.iter().map(|(t, _)| t.to_lowercase()).collect();
                                Prediction {
                                    query: q.clone(),
                                    predicted: candidates.first().cloned(),
                                    beam_rank_used: candidates.first().map(|_| 1),
                                    candidates_ranked: candidates,
                                }
                            }
                            // out-of-embedding queries score as misses
                            Err(_) => Prediction { query: q.clone(), ..Prediction::default() },
                        })
                        .collect();
                    let ks = if k >= 5 { vec![1, 5] } else { vec![1] };
                    let result = score(&predictions, &gold, &EvalConfig { ks })?;
                    print!("{}", result.text_table());
                    if let Some(path) = report {
                        std::fs::write(
                            &path,
                            serde_json::to_string_pretty(&result)
                                .map_err(|e| PipelineError::Data(e.to_string()))?,
                        )?;
                        println!("report -> {}", path.display());
                    }
                    Ok(())
                }
                _ => Err(PipelineError::Config(
                    "pass exactly one of --query or --test-lexicon".into(),
                )),
            }
        }
    }
}
