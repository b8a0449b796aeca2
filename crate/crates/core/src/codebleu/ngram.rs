//! BLEU-style n-gram precision, plain and keyword-weighted.
//!
//! For each order `n` the clipped precision is
//! `Σ_g w(g)·min(c(g), r(g)) / Σ_g w(g)·c(g)` over candidate n-grams `g`.
//! An order with candidate n-grams but no matches is smoothed to
//! `1 / (2·c_n)`, where `c_n` is the unweighted candidate n-gram count.
//! Orders for which the candidate has no n-grams at all (candidate shorter
//! than `n`) are left out of the geometric mean. The brevity penalty is
//! `1` when the candidate is at least as long as the reference and
//! `exp(1 - r/c)` otherwise.

use std::collections::BTreeMap;

use super::tokenize::{Token, TokenKind};

pub const DEFAULT_MAX_N: usize = 4;
pub const DEFAULT_KEYWORD_WEIGHT: f64 = 4.0;

pub fn ngram_match(candidate: &[Token], reference: &[Token], max_n: usize) -> f64 {
    weighted_ngram_match(candidate, reference, max_n, 1.0)
}

/// Keyword-weighted variant: an n-gram containing at least one keyword token
/// counts `kw_weight` times, any other n-gram once.
pub fn weighted_ngram_match(candidate: &[Token], reference: &[Token], max_n: usize, kw_weight: f64) -> f64 {
    assert!(kw_weight >= 1.0, "keyword weight must be at least 1");
    if candidate.is_empty() {
        return if reference.is_empty() { 1.0 } else { 0.0 };
    }
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=max_n.max(1) {
        if candidate.len() < n {
            break;
        }
        let p = order_precision(candidate, reference, n, kw_weight);
        log_sum += p.ln();
        orders += 1;
    }
    let geo = (log_sum / orders as f64).exp();
    (brevity_penalty(candidate.len(), reference.len()) * geo).clamp(0.0, 1.0)
}

pub fn brevity_penalty(cand_len: usize, ref_len: usize) -> f64 {
    if cand_len >= ref_len {
        1.0
    } else if cand_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

fn counts(tokens: &[Token], n: usize) -> BTreeMap<Vec<&str>, (usize, bool)> {
    let mut m: BTreeMap<Vec<&str>, (usize, bool)> = BTreeMap::new();
    for w in tokens.windows(n) {
        let has_kw = w.iter().any(|t| t.kind == TokenKind::Keyword);
        let e = m
            .entry(w.iter().map(|t| t.text.as_str()).collect())
            .or_insert((0, has_kw));
        e.0 += 1;
    }
    m
}

fn order_precision(candidate: &[Token], reference: &[Token], n: usize, kw_weight: f64) -> f64 {
    let cand = counts(candidate, n);
    let refs = counts(reference, n);
    let c_n = candidate.len() + 1 - n;
    let mut matched = 0.0;
    let mut total = 0.0;
    let mut any_match = false;
    for (gram, &(count, has_kw)) in &cand {
        let w = if has_kw { kw_weight } else { 1.0 };
        let clipped = refs.get(gram).map_or(0, |&(r, _)| r.min(count));
        any_match |= clipped > 0;
        matched += w * clipped as f64;
        total += w * count as f64;
    }
    if !any_match {
        return 1.0 / (2.0 * c_n as f64);
    }
    matched / total
}
