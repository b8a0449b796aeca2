//! Scores translation results against reference C++ with CodeBLEU.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebleu::{codebleu, CodeBleuScore, Weights};
use crate::corpus::Dataset;
use crate::llmclient::{TranslationResult, TranslationStatus};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no reference pair for query {0:?}")]
    MissingReference(String),
    #[error("reference pair {0:?} has no C++ side")]
    Unlabeled(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed score row: {message}")]
    Parse { line: usize, message: String },
}

/// What a candidate is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// The query's own C++ (the real metric).
    #[default]
    Query,
    /// The C++ of the last example placed in the prompt, falling back to the
    /// query's C++ for zero-shot rows. Used to self-check the mock model.
    LastShot,
}

impl std::str::FromStr for ReferenceMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "query" => Ok(Self::Query),
            "last_shot" | "last-shot" => Ok(Self::LastShot),
            o => Err(format!("unknown reference mode {o:?} (expected query|last_shot)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub query_id: String,
    pub model_id: String,
    pub shots: usize,
    pub requested_shots: usize,
    pub status: TranslationStatus,
    pub top_score: Option<f64>,
    pub reference_id: String,
    /// Absent for rows whose translation did not succeed.
    pub codebleu: Option<CodeBleuScore>,
}

impl ScoreRow {
    pub fn combined(&self) -> Option<f64> {
        self.codebleu.map(|s| s.combined)
    }
}

pub fn evaluate_results(
    results: &[TranslationResult],
    references: &Dataset,
    weights: &Weights,
    mode: ReferenceMode,
) -> Result<Vec<ScoreRow>, EvalError> {
    results
        .par_iter()
        .map(|r| {
            let reference_id = match (mode, r.example_ids.last()) {
                (ReferenceMode::LastShot, Some(id)) => id.clone(),
                _ => r.query_id.clone(),
            };
            let pair = references
                .get(&reference_id)
                .ok_or_else(|| EvalError::MissingReference(reference_id.clone()))?;
            if pair.cpp.is_empty() {
                return Err(EvalError::Unlabeled(reference_id));
            }
            let score = (r.status == TranslationStatus::Ok).then(|| codebleu(&r.candidate_cpp, &pair.cpp, weights));
            Ok(ScoreRow {
                query_id: r.query_id.clone(),
                model_id: r.model_id.clone(),
                shots: r.shots,
                requested_shots: r.requested_shots,
                status: r.status,
                top_score: r.top_score,
                reference_id,
                codebleu: score,
            })
        })
        .collect()
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> std::io::Result<()> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r).expect("score row serializes");
        buf.push(b'\n');
    }
    crate::util::write_atomic(path, &buf)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>, EvalError> {
    let f = fs::File::open(path)?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| EvalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CodePair;

    fn result(q: &str, status: TranslationStatus, cand: &str, examples: &[&str]) -> TranslationResult {
        TranslationResult {
            query_id: q.into(),
            model_id: "m".into(),
            shots: examples.len(),
            requested_shots: examples.len(),
            example_ids: examples.iter().map(|s| s.to_string()).collect(),
            top_score: None,
            raw_response: cand.into(),
            candidate_cpp: cand.into(),
            status,
            latency_ms: 0,
            diagnostic: None,
        }
    }

    fn refs() -> Dataset {
        Dataset::new(
            "d",
            vec![
                CodePair::new("a", "x = 1", "int x = 1;", "d"),
                CodePair::new("b", "y = 2", "int y = 2;\ny = y + 1;", "d"),
            ],
        )
    }

    #[test]
    fn scores_against_query_or_last_shot() {
        let rows = vec![result("a", TranslationStatus::Ok, "int y = 2;\ny = y + 1;", &["b"])];
        let q = evaluate_results(&rows, &refs(), &Weights::default(), ReferenceMode::Query).unwrap();
        assert!(q[0].combined().unwrap() < 1.0);
        let s = evaluate_results(&rows, &refs(), &Weights::default(), ReferenceMode::LastShot).unwrap();
        assert_eq!(s[0].reference_id, "b");
        assert_eq!(s[0].combined(), Some(1.0));
    }

    #[test]
    fn failed_rows_have_no_score() {
        let rows = vec![result("a", TranslationStatus::ContextOverflow, "", &[])];
        let s = evaluate_results(&rows, &refs(), &Weights::default(), ReferenceMode::Query).unwrap();
        assert_eq!(s[0].codebleu, None);
    }

    #[test]
    fn missing_reference_errors() {
        let rows = vec![result("zzz", TranslationStatus::Ok, "x;", &[])];
        assert!(matches!(
            evaluate_results(&rows, &refs(), &Weights::default(), ReferenceMode::Query),
            Err(EvalError::MissingReference(_))
        ));
    }

    #[test]
    fn score_file_round_trip() {
        let rows = vec![result("a", TranslationStatus::Ok, "int x = 1;", &[])];
        let s = evaluate_results(&rows, &refs(), &Weights::default(), ReferenceMode::Query).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        write_scores(&p, &s).unwrap();
        assert_eq!(read_scores(&p).unwrap(), s);
    }
}
