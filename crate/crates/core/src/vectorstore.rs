//! Exact (brute-force) vector store over corpus records.
//!
//! Retrieval scores every remaining record under the chosen metric and keeps
//! the best `k`; ties go to the smaller `pair_id`. Persistence is a single
//! JSON document replaced atomically on [`VectorStore::commit`].

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingBackendConfig, EmbeddingVector};

const STORE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("dimension mismatch: store has {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("zero-norm vector at index {0}")]
    ZeroNorm(usize),
    #[error("duplicate pair id {0:?} in one upsert batch")]
    DuplicateId(String),
    #[error("store has no backing file")]
    NoBackingFile,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt store file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Nearest,
    Farthest,
}

impl std::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "l2" => Ok(Self::L2),
            o => Err(format!("unknown metric {o:?} (expected cosine|l2)")),
        }
    }
}

impl std::str::FromStr for Order {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nearest" => Ok(Self::Nearest),
            "farthest" => Ok(Self::Farthest),
            o => Err(format!("unknown order {o:?} (expected nearest|farthest)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRecord {
    pub pair_id: String,
    pub embedding: EmbeddingVector,
    pub fortran: String,
    pub cpp: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalQuery {
    pub query_embedding: EmbeddingVector,
    pub k: usize,
    pub metric: Metric,
    pub order: Order,
    pub exclude_ids: BTreeSet<String>,
}

impl RetrievalQuery {
    pub fn new(query_embedding: EmbeddingVector, k: usize, metric: Metric, order: Order) -> Self {
        Self {
            query_embedding,
            k,
            metric,
            order,
            exclude_ids: BTreeSet::new(),
        }
    }

    pub fn excluding(mut self, id: impl Into<String>) -> Self {
        self.exclude_ids.insert(id.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedExample {
    pub pair_id: String,
    pub fortran: String,
    pub cpp: String,
    /// Cosine similarity or L2 distance, per the query metric.
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoreFile {
    version: u32,
    dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<EmbeddingBackendConfig>,
    records: Vec<VectorRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct VectorStore {
    records: Vec<VectorRecord>,
    index: HashMap<String, usize>,
    dim: Option<usize>,
    /// Backend that produced the stored vectors, kept so ad-hoc queries can
    /// embed new code the same way.
    pub embedding: Option<EmbeddingBackendConfig>,
    path: Option<PathBuf>,
}

impl VectorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_path(path: impl Into<PathBuf>) -> Self {
        Self {
            path: Some(path.into()),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn records(&self) -> &[VectorRecord] {
        &self.records
    }

    pub fn get(&self, pair_id: &str) -> Option<&VectorRecord> {
        self.index.get(pair_id).map(|&i| &self.records[i])
    }

    /// Inserts or replaces by `pair_id`. On any error the store is unchanged.
    pub fn upsert(&mut self, records: Vec<VectorRecord>) -> Result<(), StoreError> {
        let expected = self.dim.or_else(|| records.first().map(|r| r.embedding.dim));
        let mut seen = BTreeSet::new();
        for r in &records {
            let got = r.embedding.values.len();
            if Some(got) != expected || r.embedding.dim != got {
                return Err(StoreError::DimMismatch {
                    expected: expected.unwrap_or(got),
                    got,
                });
            }
            if !seen.insert(r.pair_id.as_str()) {
                return Err(StoreError::DuplicateId(r.pair_id.clone()));
            }
        }
        self.dim = expected;
        for r in records {
            match self.index.get(&r.pair_id) {
                Some(&i) => self.records[i] = r,
                None => {
                    self.index.insert(r.pair_id.clone(), self.records.len());
                    self.records.push(r);
                }
            }
        }
        Ok(())
    }

    /// Top-`k` records under the query's metric and order.
    pub fn query(&self, q: &RetrievalQuery) -> Result<Vec<RetrievedExample>, StoreError> {
        if q.k == 0 {
            return Ok(Vec::new());
        }
        if let Some(d) = self.dim {
            if q.query_embedding.values.len() != d {
                return Err(StoreError::DimMismatch {
                    expected: d,
                    got: q.query_embedding.values.len(),
                });
            }
        }
        let qv = &q.query_embedding.values;
        let q_norm = norm(qv);
        if q.metric == Metric::Cosine && q_norm == 0.0 {
            return Err(StoreError::ZeroNorm(0));
        }
        let mut scored: Vec<(f64, &VectorRecord)> = Vec::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            if q.exclude_ids.contains(&r.pair_id) {
                continue;
            }
            let v = &r.embedding.values;
            let s = match q.metric {
                Metric::Cosine => {
                    let n = norm(v);
                    if n == 0.0 {
                        return Err(StoreError::ZeroNorm(i));
                    }
                    dot(qv, v) / (q_norm * n)
                }
                Metric::L2 => l2_unchecked(qv, v),
            };
            scored.push((s, r));
        }
        let cmp = |a: &(f64, &VectorRecord), b: &(f64, &VectorRecord)| {
            rank_cmp(q.metric, q.order, a.0, b.0).then_with(|| a.1.pair_id.cmp(&b.1.pair_id))
        };
        let k = q.k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_by(cmp);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(i, (score, r))| RetrievedExample {
                pair_id: r.pair_id.clone(),
                fortran: r.fortran.clone(),
                cpp: r.cpp.clone(),
                score,
                rank: i + 1,
            })
            .collect())
    }

    pub fn commit(&self) -> Result<(), StoreError> {
        let path = self.path.as_ref().ok_or(StoreError::NoBackingFile)?;
        self.save(path)
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let file = StoreFile {
            version: STORE_FORMAT_VERSION,
            dim: self.dim,
            embedding: self.embedding.clone(),
            records: self.records.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&file).map_err(|e| StoreError::Format(e.to_string()))?;
        bytes.push(b'\n');
        crate::util::write_atomic(path, &bytes)?;
        Ok(())
    }

    /// Loads a store and binds it to `path` for later commits.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let file: StoreFile = serde_json::from_str(&text).map_err(|e| StoreError::Format(e.to_string()))?;
        if file.version != STORE_FORMAT_VERSION {
            return Err(StoreError::Format(format!(
                "unsupported store version {}",
                file.version
            )));
        }
        let mut store = VectorStore::with_path(path);
        store.embedding = file.embedding;
        store.upsert(file.records)?;
        if store.dim.is_none() {
            store.dim = file.dim;
        }
        Ok(store)
    }
}

/// Orders two scores best-first for the given metric and order.
fn rank_cmp(metric: Metric, order: Order, a: f64, b: f64) -> Ordering {
    let nearest_first = match metric {
        Metric::Cosine => b.total_cmp(&a),
        Metric::L2 => a.total_cmp(&b),
    };
    match order {
        Order::Nearest => nearest_first,
        Order::Farthest => nearest_first.reverse(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn l2_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64, StoreError> {
    if a.len() != b.len() {
        return Err(StoreError::DimMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 {
        return Err(StoreError::ZeroNorm(0));
    }
    if nb == 0.0 {
        return Err(StoreError::ZeroNorm(1));
    }
    Ok(dot(a, b) / (na * nb))
}

pub fn l2_dist(a: &[f64], b: &[f64]) -> Result<f64, StoreError> {
    if a.len() != b.len() {
        return Err(StoreError::DimMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(l2_unchecked(a, b))
}

/// Pairwise cosine similarity; symmetric with a unit diagonal.
pub fn similarity_matrix(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, StoreError> {
    let n = vectors.len();
    if let Some(first) = vectors.first() {
        for v in vectors {
            if v.len() != first.len() {
                return Err(StoreError::DimMismatch {
                    expected: first.len(),
                    got: v.len(),
                });
            }
        }
    }
    let norms: Vec<f64> = vectors.iter().map(|v| norm(v)).collect();
    if let Some(i) = norms.iter().position(|&x| x == 0.0) {
        return Err(StoreError::ZeroNorm(i));
    }
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 1.0;
        for j in i + 1..n {
            let s = dot(&vectors[i], &vectors[j]) / (norms[i] * norms[j]);
            m[i][j] = s;
            m[j][i] = s;
        }
    }
    Ok(m)
}
