//! CodeBLEU: n-gram, keyword-weighted n-gram, syntax-subtree and dataflow
//! match between a candidate and a reference C++ snippet.
//!
//! Both inputs are run through C++ normalization first so comments and
//! whitespace never affect a score. The combined score is the weighted sum
//! of the four components; when the reference yields no dataflow edges that
//! component is absent and the remaining weights are renormalized.

pub mod dataflow;
pub mod ngram;
pub mod syntax;
pub mod tokenize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_code, Lang};

pub use dataflow::{dataflow_match, extract_dataflow, DataflowEdge, EdgeMultiset};
pub use ngram::{ngram_match, weighted_ngram_match, DEFAULT_KEYWORD_WEIGHT, DEFAULT_MAX_N};
pub use syntax::{parse_struct, syntax_match, StructNode, StructTree};
pub use tokenize::{tokenize, Token, TokenKind};

#[derive(Debug, Error, PartialEq)]
pub enum WeightsError {
    #[error("weights must be finite and non-negative: {0:?}")]
    Negative([f64; 4]),
    #[error("weights must not all be zero")]
    Zero,
    #[error("expected four comma-separated weights, got {0:?}")]
    Parse(String),
}

/// Component weights (ngram, weighted ngram, syntax, dataflow).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub syntax: f64,
    pub dataflow: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            ngram: 0.25,
            weighted_ngram: 0.25,
            syntax: 0.25,
            dataflow: 0.25,
        }
    }
}

impl Weights {
    pub fn new(ngram: f64, weighted_ngram: f64, syntax: f64, dataflow: f64) -> Result<Self, WeightsError> {
        let w = Self {
            ngram,
            weighted_ngram,
            syntax,
            dataflow,
        };
        let arr = w.as_array();
        if arr.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(WeightsError::Negative(arr));
        }
        if arr.iter().sum::<f64>() <= 0.0 {
            return Err(WeightsError::Zero);
        }
        Ok(w)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.ngram, self.weighted_ngram, self.syntax, self.dataflow]
    }

    /// Parses `"a,b,c,d"`.
    pub fn parse(s: &str) -> Result<Self, WeightsError> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| WeightsError::Parse(s.to_string()))?;
        match parts.as_slice() {
            [a, b, c, d] => Self::new(*a, *b, *c, *d),
            _ => Err(WeightsError::Parse(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeBleuScore {
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub syntax: f64,
    /// `None` when the reference has no assignments.
    pub dataflow: Option<f64>,
    pub combined: f64,
    pub weights: Weights,
}

/// Tunables beyond the component weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeBleuOptions {
    pub max_n: usize,
    pub keyword_weight: f64,
}

impl Default for CodeBleuOptions {
    fn default() -> Self {
        Self {
            max_n: DEFAULT_MAX_N,
            keyword_weight: DEFAULT_KEYWORD_WEIGHT,
        }
    }
}

/// Weighted sum of available components, renormalizing when dataflow is absent.
///
/// If every positive weight sits on an absent component the present
/// components are averaged with equal weight.
pub fn combine(ngram: f64, weighted: f64, syntax: f64, dataflow: Option<f64>, w: &Weights) -> f64 {
    let mut parts = vec![(w.ngram, ngram), (w.weighted_ngram, weighted), (w.syntax, syntax)];
    if let Some(d) = dataflow {
        parts.push((w.dataflow, d));
    }
    let mass: f64 = parts.iter().map(|(wt, _)| wt).sum();
    let value = if mass > 0.0 {
        parts.iter().map(|(wt, s)| wt * s).sum::<f64>() / mass
    } else {
        parts.iter().map(|(_, s)| s).sum::<f64>() / parts.len() as f64
    };
    value.clamp(0.0, 1.0)
}

pub fn codebleu(candidate: &str, reference: &str, weights: &Weights) -> CodeBleuScore {
    codebleu_with(candidate, reference, weights, &CodeBleuOptions::default())
}

pub fn codebleu_with(candidate: &str, reference: &str, weights: &Weights, opts: &CodeBleuOptions) -> CodeBleuScore {
    // malformed model output (e.g. an unterminated comment) is scored as-is
    let cand = normalize_code(candidate, Lang::Cpp).unwrap_or_else(|_| candidate.to_string());
    let refr = normalize_code(reference, Lang::Cpp).unwrap_or_else(|_| reference.to_string());
    let ct = tokenize(&cand);
    let rt = tokenize(&refr);
    let ngram = ngram_match(&ct, &rt, opts.max_n);
    let weighted = weighted_ngram_match(&ct, &rt, opts.max_n, opts.keyword_weight);
    let syntax = syntax_match(&syntax::parse_tokens(&ct), &syntax::parse_tokens(&rt));
    let dataflow = dataflow_match(&extract_dataflow(&cand), &extract_dataflow(&refr));
    CodeBleuScore {
        ngram,
        weighted_ngram: weighted,
        syntax,
        dataflow,
        combined: combine(ngram, weighted, syntax, dataflow, weights),
        weights: *weights,
    }
}
