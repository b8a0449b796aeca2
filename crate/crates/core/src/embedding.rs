//! Code embeddings behind a small backend trait.
//!
//! The local backend is a hashed token-frequency embedder: every token is
//! hashed with 64-bit FNV-1a (the eight little-endian bytes of
//! [`LOCAL_HASH_SEED`] are fed first, then the token's UTF-8 bytes) into one
//! of `dim` buckets. A bucket hit `c` times gets weight `1 + ln(c)` and the
//! vector is L2-normalized. No model weights are needed, and snippets that
//! share vocabulary land close together.
//!
//! The remote backend speaks the common embeddings HTTP convention:
//! `POST {"model": .., "input": [..]}` answered by
//! `{"data": [{"embedding": [..]}]}`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebleu::tokenize::tokenize_spanned;
use crate::corpus::Dataset;
use crate::util::with_retries;

pub const LOCAL_HASH_SEED: u64 = 0x5241_4758_4c41_5445;
/// Short-context encoders (CodeBERT-class).
pub const SHORT_CONTEXT_TOKENS: usize = 512;
/// Long-context encoders (Nomic-Embed / StarEncoder-class).
pub const LONG_CONTEXT_TOKENS: usize = 8192;
pub const DEFAULT_API_KEY_ENV: &str = "RAGXLATE_EMBED_API_KEY";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("input is empty")]
    EmptyInput,
    #[error("input has no tokens to embed")]
    Degenerate,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("contract error: {0}")]
    Contract(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
    pub dim: usize,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_id: impl Into<String>) -> Result<Self, EmbeddingError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::Contract("embedding has non-finite entries".into()));
        }
        Ok(Self {
            dim: values.len(),
            values,
            model_id: model_id.into(),
        })
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Local,
    Remote,
}

impl std::str::FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(Self::Local),
            "remote" => Ok(Self::Remote),
            other => Err(format!("unknown embedding backend {other:?}")),
        }
    }
}

fn default_concurrency() -> usize {
    4
}
fn default_timeout_secs() -> u64 {
    30
}
fn default_max_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    250
}
fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingBackendConfig {
    #[serde(default)]
    pub backend: BackendKind,
    pub model_id: String,
    pub dim: usize,
    pub max_tokens: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// First retry delay; doubles on each further attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
}

impl EmbeddingBackendConfig {
    pub fn local(dim: usize, max_tokens: usize) -> Self {
        Self {
            backend: BackendKind::Local,
            model_id: format!("hashed-token-fnv1a-d{dim}"),
            dim,
            max_tokens,
            endpoint: None,
            concurrency: default_concurrency(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            backoff_ms: default_backoff_ms(),
            api_key_env: default_api_key_env(),
        }
    }

    pub fn remote(model_id: impl Into<String>, endpoint: impl Into<String>, dim: usize, max_tokens: usize) -> Self {
        Self {
            backend: BackendKind::Remote,
            model_id: model_id.into(),
            endpoint: Some(endpoint.into()),
            ..Self::local(dim, max_tokens)
        }
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim == 0 {
            return Err(EmbeddingError::Config("dim must be at least 1".into()));
        }
        if self.max_tokens == 0 {
            return Err(EmbeddingError::Config("max_tokens must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(EmbeddingError::Config("concurrency must be at least 1".into()));
        }
        if self.backend == BackendKind::Remote && self.endpoint.is_none() {
            return Err(EmbeddingError::Config("remote backend needs an endpoint".into()));
        }
        Ok(())
    }
}

pub trait Embedder: Send + Sync {
    fn config(&self) -> &EmbeddingBackendConfig;
    fn embed(&self, code: &str) -> Result<EmbeddingVector, EmbeddingError>;
}

/// Builds the backend named by `cfg.backend`.
pub fn embedder_for(cfg: &EmbeddingBackendConfig) -> Result<Box<dyn Embedder>, EmbeddingError> {
    cfg.validate()?;
    Ok(match cfg.backend {
        BackendKind::Local => Box::new(LocalEmbedder::new(cfg.clone())?),
        BackendKind::Remote => Box::new(RemoteEmbedder::new(cfg.clone())?),
    })
}

/// One-shot convenience over [`embedder_for`].
pub fn embed(code: &str, cfg: &EmbeddingBackendConfig) -> Result<EmbeddingVector, EmbeddingError> {
    embedder_for(cfg)?.embed(code)
}

/// Prefix of `code` holding its first `max_tokens` tokens.
pub fn truncate_to_tokens(code: &str, max_tokens: usize) -> &str {
    let toks = tokenize_spanned(code);
    if toks.len() <= max_tokens {
        return code;
    }
    &code[..toks[max_tokens - 1].end]
}

pub fn fnv1a_seeded(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[derive(Debug, Clone)]
pub struct LocalEmbedder {
    cfg: EmbeddingBackendConfig,
}

impl LocalEmbedder {
    pub fn new(cfg: EmbeddingBackendConfig) -> Result<Self, EmbeddingError> {
        cfg.validate()?;
        Ok(Self { cfg })
    }
}

impl Embedder for LocalEmbedder {
    fn config(&self) -> &EmbeddingBackendConfig {
        &self.cfg
    }

    fn embed(&self, code: &str) -> Result<EmbeddingVector, EmbeddingError> {
        if code.trim().is_empty() {
            return Err(EmbeddingError::EmptyInput);
        }
        let toks = tokenize_spanned(code);
        let dim = self.cfg.dim;
        let mut counts = vec![0u32; dim];
        for t in toks.iter().take(self.cfg.max_tokens) {
            let h = fnv1a_seeded(LOCAL_HASH_SEED, t.token.text.as_bytes());
            counts[(h % dim as u64) as usize] += 1;
        }
        let mut values: Vec<f64> = counts
            .iter()
            .map(|&c| if c == 0 { 0.0 } else { 1.0 + f64::from(c).ln() })
            .collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbeddingError::Degenerate);
        }
        values.iter_mut().for_each(|v| *v /= norm);
        EmbeddingVector::new(values, self.cfg.model_id.clone())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

pub struct RemoteEmbedder {
    cfg: EmbeddingBackendConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

impl RemoteEmbedder {
    pub fn new(cfg: EmbeddingBackendConfig) -> Result<Self, EmbeddingError> {
        cfg.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| EmbeddingError::Config(format!("http client: {e}")))?;
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(Self { cfg, client, api_key })
    }

    /// Exact request body sent for `code` (after truncation).
    pub fn request_body(&self, code: &str) -> Vec<u8> {
        let req = EmbedRequest {
            model: &self.cfg.model_id,
            input: vec![truncate_to_tokens(code, self.cfg.max_tokens)],
        };
        serde_json::to_vec(&req).expect("request serializes")
    }

    fn post_once(&self, body: &[u8]) -> Result<String, (bool, String)> {
        let endpoint = self.cfg.endpoint.as_deref().expect("validated");
        let mut req = self
            .client
            .post(endpoint)
            .header("content-type", "application/json")
            .body(body.to_vec());
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| (true, e.to_string()))?;
        if status.is_success() {
            Ok(text)
        } else {
            let retryable = status.is_server_error() || status.as_u16() == 429;
            Err((
                retryable,
                format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()),
            ))
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn config(&self) -> &EmbeddingBackendConfig {
        &self.cfg
    }

    fn embed(&self, code: &str) -> Result<EmbeddingVector, EmbeddingError> {
        if code.trim().is_empty() {
            return Err(EmbeddingError::EmptyInput);
        }
        let body = self.request_body(code);
        let text = with_retries(self.cfg.max_retries, self.cfg.backoff_ms, || self.post_once(&body)).map_err(|f| {
            EmbeddingError::Transport {
                attempts: f.attempts,
                message: f.message,
            }
        })?;
        let parsed: EmbedResponse = serde_json::from_str(&text)
            .map_err(|e| EmbeddingError::Contract(format!("bad embeddings response: {e}")))?;
        let first = parsed
            .data
            .into_iter()
            .next()
            .ok_or_else(|| EmbeddingError::Contract("response has no data entries".into()))?;
        if first.embedding.len() != self.cfg.dim {
            return Err(EmbeddingError::Contract(format!(
                "expected dimension {}, service returned {}",
                self.cfg.dim,
                first.embedding.len()
            )));
        }
        EmbeddingVector::new(first.embedding, self.cfg.model_id.clone())
    }
}

#[derive(Debug, Default)]
pub struct BatchEmbedding {
    pub vectors: Vec<(String, EmbeddingVector)>,
    pub failures: Vec<(String, String)>,
}

/// Embeds every pair's Fortran with at most `concurrency` requests in flight.
/// Output keeps dataset order; failures are collected, not dropped.
pub fn embed_dataset(ds: &Dataset, embedder: &dyn Embedder) -> BatchEmbedding {
    let threads = embedder.config().concurrency.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    let results: Vec<(String, Result<EmbeddingVector, EmbeddingError>)> = pool.install(|| {
        use rayon::prelude::*;
        ds.pairs
            .par_iter()
            .map(|p| (p.id.clone(), embedder.embed(&p.fortran)))
            .collect()
    });
    let mut out = BatchEmbedding::default();
    for (id, r) in results {
        match r {
            Ok(v) => out.vectors.push((id, v)),
            Err(e) => out.failures.push((id, e.to_string())),
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct VectorLine {
    id: String,
    model_id: String,
    dim: usize,
    values: Vec<f64>,
}

pub fn save_vectors(vectors: &[(String, EmbeddingVector)], path: &Path) -> Result<(), EmbeddingError> {
    let mut buf = Vec::new();
    for (id, v) in vectors {
        let line = VectorLine {
            id: id.clone(),
            model_id: v.model_id.clone(),
            dim: v.dim,
            values: v.values.clone(),
        };
        serde_json::to_writer(&mut buf, &line).expect("vector serializes");
        buf.push(b'\n');
    }
    crate::util::write_atomic(path, &buf)?;
    Ok(())
}

pub fn load_vectors(path: &Path) -> Result<Vec<(String, EmbeddingVector)>, EmbeddingError> {
    let f = fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: VectorLine =
            serde_json::from_str(&line).map_err(|e| EmbeddingError::Contract(format!("line {}: {e}", i + 1)))?;
        if v.values.len() != v.dim {
            return Err(EmbeddingError::Contract(format!(
                "line {}: dim {} but {} values",
                i + 1,
                v.dim,
                v.values.len()
            )));
        }
        out.push((v.id, EmbeddingVector::new(v.values, v.model_id)?));
    }
    Ok(out)
}

/// Bucket counts before weighting; exposed for inspection tooling.
pub fn bucket_counts(code: &str, dim: usize, max_tokens: usize) -> BTreeMap<usize, u32> {
    let mut m = BTreeMap::new();
    for t in tokenize_spanned(code).iter().take(max_tokens) {
        let h = fnv1a_seeded(LOCAL_HASH_SEED, t.token.text.as_bytes());
        *m.entry((h % dim as u64) as usize).or_default() += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CodePair;

    #[test]
    fn fnv_reference_values() {
        // unseeded FNV-1a test vectors: "" and "a"
        let plain = |bytes: &[u8]| {
            let mut h = FNV_OFFSET;
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(FNV_PRIME);
            }
            h
        };
        assert_eq!(plain(b""), 0xcbf29ce484222325);
        assert_eq!(plain(b"a"), 0xaf63dc4c8601ec8c);
        let mut seeded_input = LOCAL_HASH_SEED.to_le_bytes().to_vec();
        seeded_input.extend_from_slice(b"a");
        assert_eq!(fnv1a_seeded(LOCAL_HASH_SEED, b"a"), plain(&seeded_input));
    }

    #[test]
    fn deterministic_and_unit_norm() {
        let e = LocalEmbedder::new(EmbeddingBackendConfig::local(64, 512)).unwrap();
        let a = e.embed("do i = 1, n\n  y(i) = a * x(i)\nend do").unwrap();
        let b = e.embed("do i = 1, n\n  y(i) = a * x(i)\nend do").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim, 64);
        assert!((a.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn truncation_matches_prefix() {
        let e = LocalEmbedder::new(EmbeddingBackendConfig::local(32, 3)).unwrap();
        assert_eq!(e.embed("a = b + c * d").unwrap(), e.embed("a = b").unwrap());
        assert_eq!(truncate_to_tokens("a = b + c", 3), "a = b");
        assert_eq!(truncate_to_tokens("a = b", 10), "a = b");
    }

    #[test]
    fn empty_input_errors() {
        let e = LocalEmbedder::new(EmbeddingBackendConfig::local(8, 8)).unwrap();
        assert!(matches!(e.embed("  \n"), Err(EmbeddingError::EmptyInput)));
    }

    #[test]
    fn config_validation() {
        assert!(LocalEmbedder::new(EmbeddingBackendConfig::local(0, 8)).is_err());
        assert!(LocalEmbedder::new(EmbeddingBackendConfig::local(8, 0)).is_err());
        let mut r = EmbeddingBackendConfig::remote("m", "http://x", 8, 8);
        r.endpoint = None;
        assert!(r.validate().is_err());
    }

    #[test]
    fn dataset_failures_are_reported() {
        let mut pairs: Vec<CodePair> = (0..11)
            .map(|i| CodePair::new(format!("p{i}"), format!("x{i} = {i}"), "c", "t"))
            .collect();
        pairs.insert(5, CodePair::new("blank", "   ", "c", "t"));
        let ds = Dataset::new("t", pairs);
        let e = LocalEmbedder::new(EmbeddingBackendConfig::local(16, 512)).unwrap();
        let out = embed_dataset(&ds, &e);
        assert_eq!(out.vectors.len(), 11);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].0, "blank");
        let ids: Vec<&str> = out.vectors.iter().map(|(id, _)| id.as_str()).collect();
        let expected: Vec<String> = (0..11).map(|i| format!("p{i}")).collect();
        assert_eq!(ids, expected.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(embed_dataset(&Dataset::new("e", vec![]), &e).vectors.is_empty());
    }

    #[test]
    fn vectors_file_round_trip() {
        let e = LocalEmbedder::new(EmbeddingBackendConfig::local(16, 512)).unwrap();
        let vs = vec![
            ("a".to_string(), e.embed("x = 1").unwrap()),
            ("b".to_string(), e.embed("y").unwrap()),
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.jsonl");
        save_vectors(&vs, &p).unwrap();
        assert_eq!(load_vectors(&p).unwrap(), vs);
    }
}
