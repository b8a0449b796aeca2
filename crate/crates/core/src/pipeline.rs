//! Config-driven end-to-end runs: ingest → embed → index → translate →
//! evaluate → report, with a manifest that lets unchanged stages be skipped.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::codebleu::tokenize::keyword_list;
use crate::codebleu::Weights;
use crate::corpus::{
    filter_by_size, load_dataset, save_dataset, CodePair, Dataset, DEFAULT_MAX_BYTES, DEFAULT_MIN_BYTES,
};
use crate::embedding::{
    embed_dataset, embedder_for, load_vectors, save_vectors, EmbeddingBackendConfig, EmbeddingVector,
};
use crate::evaluate::{evaluate_results, read_scores, write_scores, ReferenceMode, ScoreRow};
use crate::llmclient::{
    read_results, translate_batch, ModelConfig, ModelHandle, RetrievalSettings, TranslationResult, TranslationStatus,
};
use crate::prompting::ExampleOrder;
use crate::report;
use crate::util::{sha256_file, sha256_hex, write_atomic};
use crate::vectorstore::{similarity_matrix, Metric, Order, VectorRecord, VectorStore};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
pub const STAGES: [&str; 6] = ["ingest", "embed", "index", "translate", "evaluate", "report"];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
}

impl PipelineError {
    fn stage(stage: &str, e: impl std::fmt::Display) -> Self {
        Self::Stage {
            stage: stage.to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub path: PathBuf,
    #[serde(default = "default_min_bytes")]
    pub min_bytes: usize,
    #[serde(default = "default_max_bytes")]
    pub max_bytes: usize,
    /// Whether this dataset's labeled pairs are translated and scored. All
    /// labeled pairs serve as retrieval examples either way.
    #[serde(default = "yes")]
    pub queries: bool,
}

fn default_min_bytes() -> usize {
    DEFAULT_MIN_BYTES
}
fn default_max_bytes() -> usize {
    DEFAULT_MAX_BYTES
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalConfig {
    #[serde(default = "default_metric")]
    pub metric: Metric,
    #[serde(default = "default_order")]
    pub order: Order,
    #[serde(default)]
    pub example_order: ExampleOrder,
}

fn default_metric() -> Metric {
    Metric::Cosine
}
fn default_order() -> Order {
    Order::Nearest
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            metric: default_metric(),
            order: default_order(),
            example_order: ExampleOrder::default(),
        }
    }
}

impl From<RetrievalConfig> for RetrievalSettings {
    fn from(r: RetrievalConfig) -> Self {
        Self {
            metric: r.metric,
            order: r.order,
            example_order: r.example_order,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub reference: ReferenceMode,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            weights: Weights::default(),
            reference: ReferenceMode::Query,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetConfig>,
    pub embedding: EmbeddingBackendConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    pub shots: Vec<usize>,
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub metrics: MetricsConfig,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Translate a seeded subset of at most this many queries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_queries: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelsFile {
    models: Vec<ModelConfig>,
}

/// Reads a TOML file holding a `[[models]]` array.
pub fn load_models(path: &Path) -> Result<Vec<ModelConfig>, PipelineError> {
    let text =
        fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("reading {}: {e}", path.display())))?;
    let file: ModelsFile =
        toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    if file.models.is_empty() {
        return Err(PipelineError::Config(format!("{}: no models listed", path.display())));
    }
    for m in &file.models {
        m.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    Ok(file.models)
}

/// Parses `"0,1,2,3"`; duplicates are dropped, first occurrence wins.
pub fn parse_shot_list(s: &str) -> Result<Vec<usize>, PipelineError> {
    if s.trim().is_empty() {
        return Err(PipelineError::Config("shot list is empty".into()));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for part in s.split(',') {
        let k: usize = part
            .trim()
            .parse()
            .map_err(|_| PipelineError::Config(format!("bad shot count {part:?} in {s:?}")))?;
        if seen.insert(k) {
            out.push(k);
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Reads a TOML config; relative paths resolve against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text =
            fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("reading {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.datasets {
            fix(&mut d.path);
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let cfg_err = |m: String| Err(PipelineError::Config(m));
        if self.datasets.is_empty() {
            return cfg_err("no datasets configured".into());
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(d.name.as_str()) {
                return cfg_err(format!("dataset name {:?} used twice", d.name));
            }
            if !d.path.is_file() {
                return cfg_err(format!("dataset {:?}: {} does not exist", d.name, d.path.display()));
            }
            if d.min_bytes > d.max_bytes {
                return cfg_err(format!("dataset {:?}: min_bytes exceeds max_bytes", d.name));
            }
        }
        if self.shots.is_empty() {
            return cfg_err("shot list is empty".into());
        }
        if self.models.is_empty() {
            return cfg_err("no models configured".into());
        }
        let mut ids = BTreeSet::new();
        for m in &self.models {
            if !ids.insert(m.model_id.as_str()) {
                return cfg_err(format!("model id {:?} used twice", m.model_id));
            }
            m.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        self.embedding
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let w = self.metrics.weights;
        Weights::new(w.ngram, w.weighted_ngram, w.syntax, w.dataflow)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    /// Hash of everything that affects results. Dataset files enter by
    /// content, and the output directory is left out, so the same experiment
    /// hashes the same wherever it runs.
    pub fn config_hash(&self) -> Result<String, PipelineError> {
        let datasets = self
            .datasets
            .iter()
            .map(|d| {
                let h =
                    sha256_file(&d.path).map_err(|e| PipelineError::Config(format!("{}: {e}", d.path.display())))?;
                Ok(json!({
                    "name": d.name,
                    "sha256": h,
                    "min_bytes": d.min_bytes,
                    "max_bytes": d.max_bytes,
                    "queries": d.queries,
                }))
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let v = json!({
            "datasets": datasets,
            "embedding": self.embedding,
            "retrieval": self.retrieval,
            "shots": self.shots,
            "models": self.models,
            "metrics": self.metrics,
            "seed": self.seed,
            "max_queries": self.max_queries,
        });
        Ok(sha256_hex(v.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    /// Hash of the stage's parameters and input contents.
    pub fingerprint: String,
    pub outputs: Vec<OutputRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub ragxlate_version: String,
    pub keyword_list_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Option<Self> {
        let bytes = fs::read(path).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn completed(&self) -> usize {
        self.stages
            .iter()
            .filter(|s| s.status == StageStatus::Completed)
            .count()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
}

/// Joins datasets into one pool; ids must be unique across all of them.
pub fn combine_datasets(sets: &[Dataset]) -> Result<Dataset, String> {
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    for ds in sets {
        for p in &ds.pairs {
            if !seen.insert(p.id.clone()) {
                return Err(format!("pair id {:?} appears in more than one dataset", p.id));
            }
            pairs.push(p.clone());
        }
    }
    Ok(Dataset::new("combined", pairs))
}

/// Store of every labeled pair that has a vector. Unlabeled pairs cannot be
/// shown as examples and are left out.
pub fn build_store(
    vectors: Vec<(String, EmbeddingVector)>,
    pairs: &Dataset,
    embedding: Option<EmbeddingBackendConfig>,
) -> Result<VectorStore, String> {
    let by_id: BTreeMap<&str, &CodePair> = pairs.pairs.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut records = Vec::new();
    for (id, v) in vectors {
        let p = by_id
            .get(id.as_str())
            .ok_or_else(|| format!("vector {id:?} has no matching pair in the dataset"))?;
        if p.cpp.is_empty() {
            continue;
        }
        records.push(VectorRecord {
            pair_id: id,
            embedding: v,
            fortran: p.fortran.clone(),
            cpp: p.cpp.clone(),
        });
    }
    let mut store = VectorStore::new();
    store.upsert(records).map_err(|e| e.to_string())?;
    store.embedding = embedding;
    Ok(store)
}

/// Labeled pairs from query datasets, capped at `max` by a seeded hash order
/// and returned in corpus order.
pub fn select_queries(sets: &[(bool, Dataset)], max: Option<usize>, seed: u64) -> Vec<CodePair> {
    let mut qs: Vec<CodePair> = sets
        .iter()
        .filter(|(q, _)| *q)
        .flat_map(|(_, d)| d.pairs.iter().filter(|p| !p.cpp.is_empty()).cloned())
        .collect();
    if let Some(max) = max {
        if qs.len() > max {
            let key = |p: &CodePair| {
                let mut b = seed.to_le_bytes().to_vec();
                b.extend_from_slice(p.id.as_bytes());
                sha256_hex(&b)
            };
            let mut ranked: Vec<(String, usize)> = qs.iter().enumerate().map(|(i, p)| (key(p), i)).collect();
            ranked.sort();
            let keep: BTreeSet<usize> = ranked.into_iter().take(max).map(|(_, i)| i).collect();
            qs = qs
                .into_iter()
                .enumerate()
                .filter(|(i, _)| keep.contains(i))
                .map(|(_, p)| p)
                .collect();
        }
    }
    qs
}

/// Model → (query → candidate) over queries every model translated
/// successfully at `k` requested shots.
pub fn translations_at(results: &[TranslationResult], k: usize) -> BTreeMap<String, BTreeMap<String, String>> {
    let mut map: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut models = BTreeSet::new();
    for r in results.iter().filter(|r| r.requested_shots == k) {
        models.insert(r.model_id.clone());
        if r.status == TranslationStatus::Ok {
            map.entry(r.model_id.clone())
                .or_default()
                .insert(r.query_id.clone(), r.candidate_cpp.clone());
        }
    }
    let common: Option<BTreeSet<String>> = models.iter().fold(None, |acc, m| {
        let qs: BTreeSet<String> = map.get(m).map(|x| x.keys().cloned().collect()).unwrap_or_default();
        Some(match acc {
            None => qs,
            Some(a) => a.intersection(&qs).cloned().collect(),
        })
    });
    let common = common.unwrap_or_default();
    models
        .into_iter()
        .map(|m| {
            let inner = map
                .remove(&m)
                .unwrap_or_default()
                .into_iter()
                .filter(|(q, _)| common.contains(q))
                .collect();
            (m, inner)
        })
        .collect()
}

/// Writes every report artifact into `dir` and returns the paths written.
pub fn write_reports(
    dir: &Path,
    scores: &[ScoreRow],
    results: &[TranslationResult],
    store: &VectorStore,
    weights: &Weights,
) -> Result<Vec<PathBuf>, String> {
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<(), String> {
        let p = dir.join(name);
        write_atomic(&p, text.as_bytes()).map_err(|e| format!("{}: {e}", p.display()))?;
        written.push(p);
        Ok(())
    };
    let stats = report::per_k_stats(scores);
    put("stats.md", report::stats_markdown(&stats))?;
    put(
        "stats.json",
        serde_json::to_string_pretty(
            &stats
                .iter()
                .map(|((m, k), s)| json!({"model_id": m, "k": k, "mean": s.mean, "sem": s.sem, "n": s.n}))
                .collect::<Vec<_>>(),
        )
        .expect("stats serialize")
            + "\n",
    )?;
    let has_zero = stats.keys().any(|(_, k)| *k == 0);
    if has_zero {
        let deltas = report::delta_table(&stats).map_err(|e| e.to_string())?;
        put("delta.md", report::delta_markdown(&deltas))?;
    } else {
        log::info!("no zero-shot scores; skipping the delta table");
    }
    put("scatter.csv", report::scatter_csv(&report::scatter_data(scores)))?;

    let ks: BTreeSet<usize> = results.iter().map(|r| r.requested_shots).collect();
    for k in ks {
        let t = translations_at(results, k);
        if t.values().all(|m| m.is_empty()) {
            continue;
        }
        let m = report::pairwise_matrix(&t, weights).map_err(|e| e.to_string())?;
        let base = dir.join(format!("pairwise_k{k}"));
        let (csv, svg) =
            report::render_heatmap(&m.model_ids, &m.values, &format!("Pairwise CodeBLEU, {k}-shot"), &base)
                .map_err(|e| e.to_string())?;
        written.push(csv);
        written.push(svg);
    }

    if !store.is_empty() {
        let labels: Vec<String> = store.records().iter().map(|r| r.pair_id.clone()).collect();
        let vecs: Vec<Vec<f64>> = store.records().iter().map(|r| r.embedding.values.clone()).collect();
        let sim = similarity_matrix(&vecs).map_err(|e| e.to_string())?;
        let (csv, svg) = report::render_heatmap(&labels, &sim, "Embedding cosine similarity", &dir.join("similarity"))
            .map_err(|e| e.to_string())?;
        written.push(csv);
        written.push(svg);
    }
    Ok(written)
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    previous: Option<Manifest>,
    manifest: Manifest,
    manifest_path: PathBuf,
    executed: Vec<String>,
    skipped: Vec<String>,
}

impl Runner<'_> {
    fn rel(&self, p: &Path) -> String {
        p.strip_prefix(&self.out)
            .unwrap_or(p)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn output_hash(&self, stage: &str) -> Vec<String> {
        self.manifest
            .stage(stage)
            .map(|s| s.outputs.iter().map(|o| o.sha256.clone()).collect())
            .unwrap_or_default()
    }

    fn save_manifest(&self) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&self.manifest_path, text.as_bytes()).map_err(|e| PipelineError::stage("manifest", e))
    }

    /// A stage is fresh when the previous manifest completed it with the
    /// same fingerprint and all its outputs still hash as recorded.
    fn fresh(&self, name: &str, fingerprint: &str) -> Option<StageRecord> {
        let prev = self.previous.as_ref()?.stage(name)?;
        if prev.status != StageStatus::Completed || prev.fingerprint != fingerprint {
            return None;
        }
        for o in &prev.outputs {
            match sha256_file(&self.out.join(&o.path)) {
                Ok(h) if h == o.sha256 => {}
                _ => return None,
            }
        }
        Some(prev.clone())
    }

    fn stage(
        &mut self,
        name: &str,
        params: serde_json::Value,
        body: impl FnOnce(&Self, bool) -> Result<Vec<PathBuf>, String>,
    ) -> Result<(), PipelineError> {
        let inputs: Vec<Vec<String>> = STAGES
            .iter()
            .take_while(|s| **s != name)
            .map(|s| self.output_hash(s))
            .collect();
        let fingerprint = sha256_hex(
            json!({"stage": name, "params": params, "inputs": inputs})
                .to_string()
                .as_bytes(),
        );
        self.manifest.stages.retain(|s| s.name != name);
        if let Some(rec) = self.fresh(name, &fingerprint) {
            log::info!("stage {name}: up to date, skipping");
            self.manifest.stages.push(rec);
            self.skipped.push(name.to_string());
            return self.save_manifest();
        }
        // outputs left by an earlier run with other inputs must not be reused
        let stale = self
            .previous
            .as_ref()
            .and_then(|m| m.stage(name))
            .is_some_and(|s| s.fingerprint != fingerprint);
        log::info!("stage {name}: running");
        match body(self, stale) {
            Ok(paths) => {
                let mut outputs = Vec::new();
                for p in paths {
                    let sha256 = sha256_file(&p).map_err(|e| PipelineError::stage(name, e))?;
                    outputs.push(OutputRecord {
                        path: self.rel(&p),
                        sha256,
                    });
                }
                self.manifest.stages.push(StageRecord {
                    name: name.to_string(),
                    status: StageStatus::Completed,
                    fingerprint,
                    outputs,
                    error: None,
                });
                self.executed.push(name.to_string());
                self.save_manifest()
            }
            Err(message) => {
                self.manifest.stages.push(StageRecord {
                    name: name.to_string(),
                    status: StageStatus::Failed,
                    fingerprint,
                    outputs: Vec::new(),
                    error: Some(message.clone()),
                });
                self.save_manifest()?;
                Err(PipelineError::Stage {
                    stage: name.to_string(),
                    message,
                })
            }
        }
    }
}

fn corpus_path(out: &Path, name: &str) -> PathBuf {
    out.join("corpus").join(format!("{name}.jsonl"))
}

fn load_ingested(cfg: &RunConfig, out: &Path) -> Result<Vec<(bool, Dataset)>, String> {
    cfg.datasets
        .iter()
        .map(|d| {
            load_dataset(corpus_path(out, &d.name), &d.name)
                .map(|ds| (d.queries, ds))
                .map_err(|e| e.to_string())
        })
        .collect()
}

/// Runs all six stages in order, skipping any whose inputs and parameters
/// are unchanged since the last successful run in the same output directory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutcome, PipelineError> {
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out).map_err(|e| PipelineError::Config(format!("{}: {e}", out.display())))?;
    let manifest_path = out.join(MANIFEST_FILE);
    let mut runner = Runner {
        cfg,
        previous: Manifest::load(&manifest_path),
        manifest: Manifest {
            manifest_version: MANIFEST_VERSION,
            ragxlate_version: env!("CARGO_PKG_VERSION").to_string(),
            keyword_list_version: keyword_list().0.clone(),
            config_hash: cfg.config_hash()?,
            seed: cfg.seed,
            stages: Vec::new(),
        },
        out,
        manifest_path,
        executed: Vec::new(),
        skipped: Vec::new(),
    };

    let ds_params: Vec<serde_json::Value> = cfg
        .datasets
        .iter()
        .map(|d| {
            json!({
                "name": d.name,
                "sha256": sha256_file(&d.path).unwrap_or_default(),
                "min_bytes": d.min_bytes,
                "max_bytes": d.max_bytes,
            })
        })
        .collect();
    runner.stage("ingest", json!(ds_params), |r, _| {
        let mut paths = Vec::new();
        for d in &r.cfg.datasets {
            let ds = load_dataset(&d.path, &d.name).map_err(|e| e.to_string())?;
            let kept = filter_by_size(&ds, d.min_bytes, d.max_bytes).map_err(|e| e.to_string())?;
            log::info!("{}: kept {} of {} pairs", d.name, kept.len(), ds.len());
            let p = corpus_path(&r.out, &d.name);
            save_dataset(&kept, &p).map_err(|e| e.to_string())?;
            paths.push(p);
        }
        Ok(paths)
    })?;

    runner.stage("embed", json!({"embedding": cfg.embedding}), |r, _| {
        let sets = load_ingested(r.cfg, &r.out)?;
        let all = combine_datasets(&sets.into_iter().map(|(_, d)| d).collect::<Vec<_>>())?;
        let embedder = embedder_for(&r.cfg.embedding).map_err(|e| e.to_string())?;
        let batch = embed_dataset(&all, embedder.as_ref());
        if let Some((id, msg)) = batch.failures.first() {
            return Err(format!(
                "{} pair(s) failed to embed, first {id:?}: {msg}",
                batch.failures.len()
            ));
        }
        let p = r.out.join("vectors.jsonl");
        save_vectors(&batch.vectors, &p).map_err(|e| e.to_string())?;
        Ok(vec![p])
    })?;

    runner.stage("index", json!({}), |r, _| {
        let sets = load_ingested(r.cfg, &r.out)?;
        let all = combine_datasets(&sets.into_iter().map(|(_, d)| d).collect::<Vec<_>>())?;
        let vectors = load_vectors(&r.out.join("vectors.jsonl")).map_err(|e| e.to_string())?;
        let store = build_store(vectors, &all, Some(r.cfg.embedding.clone()))?;
        let p = r.out.join("store.json");
        store.save(&p).map_err(|e| e.to_string())?;
        Ok(vec![p])
    })?;

    runner.stage(
        "translate",
        json!({
            "models": cfg.models,
            "shots": cfg.shots,
            "retrieval": cfg.retrieval,
            "seed": cfg.seed,
            "max_queries": cfg.max_queries,
        }),
        |r, stale| {
            let sets = load_ingested(r.cfg, &r.out)?;
            let queries = select_queries(&sets, r.cfg.max_queries, r.cfg.seed);
            let store = VectorStore::load(r.out.join("store.json")).map_err(|e| e.to_string())?;
            let embedder = embedder_for(&r.cfg.embedding).map_err(|e| e.to_string())?;
            let models = r
                .cfg
                .models
                .iter()
                .map(|m| ModelHandle::new(m.clone()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            let p = r.out.join("results.jsonl");
            if stale {
                let _ = fs::remove_file(&p);
            }
            let rows = translate_batch(
                &queries,
                &store,
                embedder.as_ref(),
                &models,
                &r.cfg.shots,
                &r.cfg.retrieval.into(),
                &p,
            )
            .map_err(|e| e.to_string())?;
            let failed = rows.iter().filter(|x| x.status != TranslationStatus::Ok).count();
            if failed > 0 {
                log::warn!("{failed} of {} translations did not succeed", rows.len());
            }
            Ok(vec![p])
        },
    )?;

    runner.stage("evaluate", json!({"metrics": cfg.metrics}), |r, _| {
        let sets = load_ingested(r.cfg, &r.out)?;
        let all = combine_datasets(&sets.into_iter().map(|(_, d)| d).collect::<Vec<_>>())?;
        let results = read_results(&r.out.join("results.jsonl")).map_err(|e| e.to_string())?;
        let scores = evaluate_results(&results, &all, &r.cfg.metrics.weights, r.cfg.metrics.reference)
            .map_err(|e| e.to_string())?;
        let p = r.out.join("scores.jsonl");
        write_scores(&p, &scores).map_err(|e| e.to_string())?;
        Ok(vec![p])
    })?;

    runner.stage("report", json!({"weights": cfg.metrics.weights}), |r, _| {
        let scores = read_scores(&r.out.join("scores.jsonl")).map_err(|e| e.to_string())?;
        let results = read_results(&r.out.join("results.jsonl")).map_err(|e| e.to_string())?;
        let store = VectorStore::load(r.out.join("store.json")).map_err(|e| e.to_string())?;
        write_reports(&r.out.join("report"), &scores, &results, &store, &r.cfg.metrics.weights)
    })?;

    Ok(RunOutcome {
        manifest: runner.manifest,
        manifest_path: runner.manifest_path,
        executed: runner.executed,
        skipped: runner.skipped,
    })
}
