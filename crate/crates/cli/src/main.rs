use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use ragxlate::corpus::{self, Lang};
use ragxlate::embedding::{self, BackendKind, EmbeddingBackendConfig};
use ragxlate::evaluate::{self, ReferenceMode};
use ragxlate::llmclient::{self, ModelHandle, RetrievalSettings};
use ragxlate::pipeline::{self, PipelineError, RunConfig};
use ragxlate::prompting::ExampleOrder;
use ragxlate::report;
use ragxlate::vectorstore::{Metric, Order, RetrievalQuery, VectorStore};
use ragxlate::Weights;

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ragxlate",
    version,
    about = "Retrieval-augmented few-shot Fortran to C++ translation"
)]
struct Cli {
    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, normalize and size-filter a JSONL corpus.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = corpus::DEFAULT_MIN_BYTES)]
        min_bytes: usize,
        #[arg(long, default_value_t = corpus::DEFAULT_MAX_BYTES)]
        max_bytes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed the Fortran side of every pair.
    Embed {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "local")]
        backend: BackendKind,
        #[arg(long, default_value_t = 512)]
        dim: usize,
        #[arg(long, default_value_t = 512)]
        max_tokens: usize,
        /// Model name sent to a remote backend.
        #[arg(long)]
        model_id: Option<String>,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a vector store from embeddings and their labeled pairs.
    Index {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Backend recorded in the store for embedding ad-hoc queries.
        #[arg(long, default_value = "local")]
        backend: BackendKind,
        #[arg(long, default_value_t = 512)]
        max_tokens: usize,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieve the top-k examples for a stored pair or a code file.
    Query {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, conflicts_with = "file", required_unless_present = "file")]
        id: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value = "cosine")]
        metric: Metric,
        #[arg(long, default_value = "nearest")]
        order: Order,
    },
    /// Translate queries with every configured model at every shot count.
    Translate {
        #[arg(long)]
        store: PathBuf,
        /// TOML file with a `[[models]]` array.
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value = "0,1,2,3")]
        shots: String,
        /// Queries to translate; defaults to every pair in the store.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long, default_value = "cosine")]
        metric: Metric,
        #[arg(long, default_value = "nearest")]
        order: Order,
        #[arg(long, value_enum, default_value_t = Layout::MostSimilarFirst)]
        example_order: Layout,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score translation results with CodeBLEU.
    Evaluate {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        references: PathBuf,
        #[arg(long, default_value = "0.25,0.25,0.25,0.25")]
        weights: String,
        #[arg(long, default_value = "query")]
        reference: ReferenceMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize scores as tables, scatter data or model-agreement heatmaps.
    Report {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_enum)]
        kind: ReportKind,
        /// Translation results; needed for pairwise and heatmap.
        #[arg(long)]
        results: Option<PathBuf>,
        /// Shot count compared by pairwise and heatmap.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value = "0.25,0.25,0.25,0.25")]
        weights: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        shots: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        metric: Option<Metric>,
        #[arg(long)]
        order: Option<Order>,
        #[arg(long)]
        weights: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    MostSimilarFirst,
    MostSimilarLast,
}

impl From<Layout> for ExampleOrder {
    fn from(l: Layout) -> Self {
        match l {
            Layout::MostSimilarFirst => ExampleOrder::MostSimilarFirst,
            Layout::MostSimilarLast => ExampleOrder::MostSimilarLast,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Table,
    Delta,
    Pairwise,
    Scatter,
    Heatmap,
}

/// An error plus the exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

type Outcome = Result<(), Failure>;

trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn stage(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_CONFIG,
            err: e.into(),
        })
    }
    fn stage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_STAGE,
            err: e.into(),
        })
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn require_file(path: &Path, what: &str) -> Outcome {
    if path.is_file() {
        Ok(())
    } else {
        Err(anyhow!("{what} {} does not exist", path.display())).config()
    }
}

fn ingest(input: &Path, name: &str, min_bytes: usize, max_bytes: usize, out: &Path) -> Outcome {
    require_file(input, "input")?;
    if min_bytes > max_bytes {
        return Err(anyhow!("--min-bytes {min_bytes} exceeds --max-bytes {max_bytes}")).config();
    }
    let ds = corpus::load_dataset(input, name).stage()?;
    let kept = corpus::filter_by_size(&ds, min_bytes, max_bytes).stage()?;
    corpus::save_dataset(&kept, out).stage()?;
    println!("{name}: kept {} of {} pairs -> {}", kept.len(), ds.len(), out.display());
    Ok(())
}

fn embedding_config(
    backend: BackendKind,
    dim: usize,
    max_tokens: usize,
    model_id: Option<String>,
    endpoint: Option<String>,
) -> Result<EmbeddingBackendConfig, Failure> {
    let cfg = match backend {
        BackendKind::Local => EmbeddingBackendConfig::local(dim, max_tokens),
        BackendKind::Remote => {
            let model = model_id
                .ok_or_else(|| anyhow!("--model-id is required for the remote backend"))
                .config()?;
            let endpoint = endpoint
                .ok_or_else(|| anyhow!("--endpoint is required for the remote backend"))
                .config()?;
            EmbeddingBackendConfig::remote(model, endpoint, dim, max_tokens)
        }
    };
    cfg.validate().config()?;
    Ok(cfg)
}

#[allow(clippy::too_many_arguments)]
fn embed(
    dataset: &Path,
    backend: BackendKind,
    dim: usize,
    max_tokens: usize,
    model_id: Option<String>,
    endpoint: Option<String>,
    out: &Path,
) -> Outcome {
    require_file(dataset, "dataset")?;
    let cfg = embedding_config(backend, dim, max_tokens, model_id, endpoint)?;
    let ds = corpus::load_dataset(dataset, &dataset_name(dataset)).stage()?;
    let embedder = embedding::embedder_for(&cfg).config()?;
    let batch = embedding::embed_dataset(&ds, embedder.as_ref());
    for (id, msg) in &batch.failures {
        log::error!("{id}: {msg}");
    }
    embedding::save_vectors(&batch.vectors, out).stage()?;
    println!(
        "embedded {} of {} pairs -> {}",
        batch.vectors.len(),
        ds.len(),
        out.display()
    );
    if !batch.failures.is_empty() {
        return Err(anyhow!("{} pair(s) failed to embed", batch.failures.len())).stage();
    }
    Ok(())
}

fn index(
    vectors: &Path,
    dataset: &Path,
    backend: BackendKind,
    max_tokens: usize,
    endpoint: Option<String>,
    out: &Path,
) -> Outcome {
    require_file(vectors, "vectors file")?;
    require_file(dataset, "dataset")?;
    let vecs = embedding::load_vectors(vectors).stage()?;
    let ds = corpus::load_dataset(dataset, &dataset_name(dataset)).stage()?;
    let recorded = vecs.first().map(|(_, v)| {
        let mut cfg = EmbeddingBackendConfig::local(v.dim, max_tokens);
        if backend == BackendKind::Remote {
            cfg.backend = BackendKind::Remote;
            cfg.model_id = v.model_id.clone();
            cfg.endpoint = endpoint.clone();
        } else if cfg.model_id != v.model_id {
            log::warn!(
                "vectors come from {:?}, not the local backend; ad-hoc queries will not match",
                v.model_id
            );
        }
        cfg
    });
    let store = pipeline::build_store(vecs, &ds, recorded)
        .map_err(|e| anyhow!(e))
        .stage()?;
    store.save(out).stage()?;
    println!("indexed {} records -> {}", store.len(), out.display());
    Ok(())
}

fn query(
    store_path: &Path,
    id: Option<String>,
    file: Option<PathBuf>,
    k: usize,
    metric: Metric,
    order: Order,
) -> Outcome {
    require_file(store_path, "store")?;
    let store = VectorStore::load(store_path).stage()?;
    let q = match (id, file) {
        (Some(id), _) => {
            let rec = store
                .get(&id)
                .ok_or_else(|| anyhow!("no record {id:?} in {}", store_path.display()))
                .config()?;
            RetrievalQuery::new(rec.embedding.clone(), k, metric, order).excluding(id)
        }
        (None, Some(path)) => {
            require_file(&path, "code file")?;
            let cfg = store
                .embedding
                .clone()
                .ok_or_else(|| anyhow!("store does not record its embedding backend"))
                .config()?;
            let raw = fs::read_to_string(&path)
                .with_context(|| path.display().to_string())
                .stage()?;
            let code = corpus::normalize_code(&raw, Lang::Fortran).stage()?;
            let v = embedding::embed(&code, &cfg).stage()?;
            RetrievalQuery::new(v, k, metric, order)
        }
        (None, None) => return Err(anyhow!("one of --id or --file is required")).config(),
    };
    for hit in store.query(&q).stage()? {
        println!("{}\t{}\t{:.6}", hit.rank, hit.pair_id, hit.score);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn translate(
    store_path: &Path,
    models: &Path,
    shots: &str,
    queries: Option<PathBuf>,
    settings: RetrievalSettings,
    out: &Path,
) -> Outcome {
    require_file(store_path, "store")?;
    require_file(models, "models config")?;
    let shots = pipeline::parse_shot_list(shots).config()?;
    let model_cfgs = pipeline::load_models(models).config()?;
    let store = VectorStore::load(store_path).stage()?;
    let qs = match queries {
        Some(p) => {
            require_file(&p, "queries dataset")?;
            corpus::load_dataset(&p, &dataset_name(&p)).stage()?.pairs
        }
        None => store
            .records()
            .iter()
            .map(|r| ragxlate::CodePair::new(&r.pair_id, &r.fortran, &r.cpp, "store"))
            .collect(),
    };
    let emb_cfg = store
        .embedding
        .clone()
        .unwrap_or_else(|| EmbeddingBackendConfig::local(store.dim().unwrap_or(512), 512));
    let embedder = embedding::embedder_for(&emb_cfg).config()?;
    let handles = model_cfgs
        .into_iter()
        .map(ModelHandle::new)
        .collect::<Result<Vec<_>, _>>()
        .config()?;
    let rows = llmclient::translate_batch(&qs, &store, embedder.as_ref(), &handles, &shots, &settings, out).stage()?;
    let ok = rows
        .iter()
        .filter(|r| r.status == llmclient::TranslationStatus::Ok)
        .count();
    println!("{} results ({ok} ok) -> {}", rows.len(), out.display());
    Ok(())
}

fn evaluate_cmd(results: &Path, references: &Path, weights: &str, mode: ReferenceMode, out: &Path) -> Outcome {
    require_file(results, "results")?;
    require_file(references, "references")?;
    let w = Weights::parse(weights).config()?;
    let rows = llmclient::read_results(results).stage()?;
    let refs = corpus::load_dataset(references, &dataset_name(references)).stage()?;
    let scores = evaluate::evaluate_results(&rows, &refs, &w, mode).stage()?;
    evaluate::write_scores(out, &scores).stage()?;
    println!("scored {} rows -> {}", scores.len(), out.display());
    Ok(())
}

fn write_text(out: &Path, text: &str) -> Outcome {
    ragxlate::util::write_atomic(out, text.as_bytes())
        .with_context(|| out.display().to_string())
        .stage()
}

fn report_cmd(
    scores: &Path,
    kind: ReportKind,
    results: Option<PathBuf>,
    k: usize,
    weights: &str,
    out: &Path,
) -> Outcome {
    require_file(scores, "scores")?;
    let w = Weights::parse(weights).config()?;
    let rows = evaluate::read_scores(scores).stage()?;
    let stats = report::per_k_stats(&rows);
    match kind {
        ReportKind::Table => write_text(out, &report::stats_markdown(&stats))?,
        ReportKind::Delta => {
            let d = report::delta_table(&stats).config()?;
            write_text(out, &report::delta_markdown(&d))?
        }
        ReportKind::Scatter => write_text(out, &report::scatter_csv(&report::scatter_data(&rows)))?,
        ReportKind::Pairwise | ReportKind::Heatmap => {
            let results = results
                .ok_or_else(|| anyhow!("--results is required for pairwise and heatmap reports"))
                .config()?;
            require_file(&results, "results")?;
            let rs = llmclient::read_results(&results).stage()?;
            let t = pipeline::translations_at(&rs, k);
            if t.is_empty() {
                return Err(anyhow!("no results at k={k}")).config();
            }
            let m = report::pairwise_matrix(&t, &w).stage()?;
            if matches!(kind, ReportKind::Pairwise) {
                write_text(out, &report::matrix_csv(&m.model_ids, &m.values))?;
            } else {
                let (csv, svg) =
                    report::render_heatmap(&m.model_ids, &m.values, &format!("Pairwise CodeBLEU, {k}-shot"), out)
                        .stage()?;
                println!("{}\n{}", csv.display(), svg.display());
                return Ok(());
            }
        }
    }
    println!("{}", out.display());
    Ok(())
}

struct RunOverrides {
    output_dir: Option<PathBuf>,
    shots: Option<String>,
    seed: Option<u64>,
    metric: Option<Metric>,
    order: Option<Order>,
    weights: Option<String>,
}

fn run(config: &Path, o: RunOverrides) -> Outcome {
    let mut cfg = RunConfig::from_file(config).config()?;
    if let Some(d) = o.output_dir {
        cfg.output_dir = d;
    }
    if let Some(s) = o.shots {
        cfg.shots = pipeline::parse_shot_list(&s).config()?;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(m) = o.metric {
        cfg.retrieval.metric = m;
    }
    if let Some(ord) = o.order {
        cfg.retrieval.order = ord;
    }
    if let Some(w) = o.weights {
        cfg.metrics.weights = Weights::parse(&w).config()?;
    }
    let outcome = match pipeline::run_pipeline(&cfg) {
        Ok(x) => x,
        Err(e @ PipelineError::Config(_)) => return Err(e).config(),
        Err(e) => return Err(e).stage(),
    };
    for s in &outcome.manifest.stages {
        let how = if outcome.skipped.contains(&s.name) {
            "skipped"
        } else {
            "done"
        };
        println!("{:<10} {how}", s.name);
    }
    println!("manifest -> {}", outcome.manifest_path.display());
    Ok(())
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Ingest {
            input,
            name,
            min_bytes,
            max_bytes,
            out,
        } => ingest(&input, &name, min_bytes, max_bytes, &out),
        Command::Embed {
            dataset,
            backend,
            dim,
            max_tokens,
            model_id,
            endpoint,
            out,
        } => embed(&dataset, backend, dim, max_tokens, model_id, endpoint, &out),
        Command::Index {
            vectors,
            dataset,
            backend,
            max_tokens,
            endpoint,
            out,
        } => index(&vectors, &dataset, backend, max_tokens, endpoint, &out),
        Command::Query {
            store,
            id,
            file,
            k,
            metric,
            order,
        } => query(&store, id, file, k, metric, order),
        Command::Translate {
            store,
            models,
            shots,
            queries,
            metric,
            order,
            example_order,
            out,
        } => translate(
            &store,
            &models,
            &shots,
            queries,
            RetrievalSettings {
                metric,
                order,
                example_order: example_order.into(),
            },
            &out,
        ),
        Command::Evaluate {
            results,
            references,
            weights,
            reference,
            out,
        } => evaluate_cmd(&results, &references, &weights, reference, &out),
        Command::Report {
            scores,
            kind,
            results,
            k,
            weights,
            out,
        } => report_cmd(&scores, kind, results, k, &weights, &out),
        Command::Run {
            config,
            output_dir,
            shots,
            seed,
            metric,
            order,
            weights,
        } => run(
            &config,
            RunOverrides {
                output_dir,
                shots,
                seed,
                metric,
                order,
                weights,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
