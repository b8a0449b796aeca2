//! Aggregation and rendering of scores: mean ± SEM tables, zero-vs-few-shot
//! deltas, similarity/score scatter rows, pairwise model matrices and
//! heatmaps (CSV + SVG).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebleu::{codebleu, Weights};
use crate::evaluate::ScoreRow;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot aggregate an empty score list")]
    Empty,
    #[error("model {0:?} has no zero-shot scores")]
    MissingZeroShot(String),
    #[error("models disagree on query ids: {0:?} vs {1:?}")]
    QueryMismatch(String, String),
    #[error("matrix is not square")]
    NotSquare,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStat {
    pub mean: f64,
    /// Sample standard deviation (n - 1) over √n; zero when n = 1.
    pub sem: f64,
    pub n: usize,
}

pub fn aggregate(scores: &[f64]) -> Result<AggregateStat, ReportError> {
    let n = scores.len();
    if n == 0 {
        return Err(ReportError::Empty);
    }
    // sort first so the result does not depend on input order
    let mut xs = scores.to_vec();
    xs.sort_by(f64::total_cmp);
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sem = if n == 1 {
        0.0
    } else {
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Ok(AggregateStat { mean, sem, n })
}

pub type StatKey = (String, usize);

/// Mean ± SEM of combined CodeBLEU per (model, requested shots), over rows
/// that produced a score.
pub fn per_k_stats(rows: &[ScoreRow]) -> BTreeMap<StatKey, AggregateStat> {
    let mut groups: BTreeMap<StatKey, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Some(c) = r.combined() {
            groups
                .entry((r.model_id.clone(), r.requested_shots))
                .or_default()
                .push(c);
        }
    }
    groups
        .into_iter()
        .map(|(k, v)| (k, aggregate(&v).expect("groups are non-empty")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub model_id: String,
    pub zero_shot: f64,
    /// k → mean_k − zero_shot, for k ≥ 1.
    pub deltas: BTreeMap<usize, f64>,
}

pub fn delta_table(stats: &BTreeMap<StatKey, AggregateStat>) -> Result<Vec<DeltaRow>, ReportError> {
    let models: BTreeSet<&str> = stats.keys().map(|(m, _)| m.as_str()).collect();
    let mut rows = Vec::new();
    for m in models {
        let zero = stats
            .get(&(m.to_string(), 0))
            .ok_or_else(|| ReportError::MissingZeroShot(m.to_string()))?
            .mean;
        let deltas = stats
            .iter()
            .filter(|((mm, k), _)| mm == m && *k > 0)
            .map(|((_, k), s)| (*k, s.mean - zero))
            .collect();
        rows.push(DeltaRow {
            model_id: m.to_string(),
            zero_shot: zero,
            deltas,
        });
    }
    Ok(rows)
}

/// Signed three-decimal form: `+0.363`, `-0.012`, `0.000`.
pub fn format_delta(d: f64) -> String {
    let s = format!("{:.3}", d.abs());
    if s == "0.000" {
        s
    } else if d > 0.0 {
        format!("+{s}")
    } else {
        format!("-{s}")
    }
}

fn shot_label(k: usize) -> String {
    if k == 0 {
        "Zero-shot".to_string()
    } else {
        format!("{k}-shot")
    }
}

/// Model × shots table of `mean ± sem`; missing cells read `nan ± nan`.
pub fn stats_markdown(stats: &BTreeMap<StatKey, AggregateStat>) -> String {
    let models: BTreeSet<&str> = stats.keys().map(|(m, _)| m.as_str()).collect();
    let ks: BTreeSet<usize> = stats.keys().map(|(_, k)| *k).collect();
    let mut out = String::from("| Model |");
    for k in &ks {
        let _ = write!(out, " {} (mean ± SEM) |", shot_label(*k));
    }
    out.push_str("\n|---|");
    for _ in &ks {
        out.push_str("---|");
    }
    out.push('\n');
    for m in models {
        let _ = write!(out, "| {m} |");
        for k in &ks {
            match stats.get(&(m.to_string(), *k)) {
                Some(s) => {
                    let _ = write!(out, " {:.3} ± {:.3} |", s.mean, s.sem);
                }
                None => out.push_str(" nan ± nan |"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn delta_markdown(rows: &[DeltaRow]) -> String {
    let ks: BTreeSet<usize> = rows.iter().flat_map(|r| r.deltas.keys().copied()).collect();
    let mut out = String::from("| Model | Zero-shot |");
    for k in &ks {
        let _ = write!(out, " Δ {} |", shot_label(*k));
    }
    out.push_str("\n|---|---|");
    for _ in &ks {
        out.push_str("---|");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "| {} | {:.3} |", r.model_id, r.zero_shot);
        for k in &ks {
            match r.deltas.get(k) {
                Some(d) => {
                    let _ = write!(out, " {} |", format_delta(*d));
                }
                None => out.push_str(" nan |"),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub model_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// Symmetrized mean CodeBLEU between every pair of models' outputs.
///
/// `translations` maps model id → (query id → candidate). Entry (i, j) is
/// the mean over queries of `(cb(i→j) + cb(j→i)) / 2`; the diagonal is 1.
pub fn pairwise_matrix(
    translations: &BTreeMap<String, BTreeMap<String, String>>,
    weights: &Weights,
) -> Result<PairwiseMatrix, ReportError> {
    let model_ids: Vec<String> = translations.keys().cloned().collect();
    if let Some(first) = model_ids.first() {
        let qs: BTreeSet<&String> = translations[first].keys().collect();
        for m in &model_ids[1..] {
            if translations[m].keys().collect::<BTreeSet<_>>() != qs {
                return Err(ReportError::QueryMismatch(first.clone(), m.clone()));
            }
        }
        if qs.is_empty() {
            return Err(ReportError::Empty);
        }
    }
    let n = model_ids.len();
    let mut values = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let a = &translations[&model_ids[i]];
            let b = &translations[&model_ids[j]];
            let per_query: Vec<f64> = a
                .iter()
                .map(|(q, out_i)| {
                    let out_j = &b[q];
                    0.5 * (codebleu(out_i, out_j, weights).combined + codebleu(out_j, out_i, weights).combined)
                })
                .collect();
            let mean = per_query.iter().sum::<f64>() / per_query.len() as f64;
            values[i][j] = mean;
            values[j][i] = mean;
        }
    }
    Ok(PairwiseMatrix { model_ids, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub query_id: String,
    pub model_id: String,
    pub k: usize,
    pub shot_similarity: f64,
    pub codebleu_combined: f64,
}

/// Few-shot rows joined with their rank-1 retrieval score.
pub fn scatter_data(rows: &[ScoreRow]) -> Vec<ScatterRow> {
    rows.iter()
        .filter(|r| r.requested_shots >= 1)
        .filter_map(|r| {
            Some(ScatterRow {
                query_id: r.query_id.clone(),
                model_id: r.model_id.clone(),
                k: r.requested_shots,
                shot_similarity: r.top_score?,
                codebleu_combined: r.combined()?,
            })
        })
        .collect()
}

pub fn scatter_csv(rows: &[ScatterRow]) -> String {
    let mut out = String::from("query_id,model_id,k,shot_similarity,codebleu_combined\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6}",
            csv_field(&r.query_id),
            csv_field(&r.model_id),
            r.k,
            r.shot_similarity,
            r.codebleu_combined
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn matrix_csv(labels: &[String], values: &[Vec<f64>]) -> String {
    let mut out = String::from("label");
    for l in labels {
        let _ = write!(out, ",{}", csv_field(l));
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(values) {
        out.push_str(&csv_field(l));
        for v in row {
            let _ = write!(out, ",{v:.6}");
        }
        out.push('\n');
    }
    out
}

const CELL: usize = 48;
const LABEL_SPACE: usize = 140;

/// Cell colour on a white → dark blue ramp; values are clamped to [0, 1].
fn ramp(v: f64) -> (u8, u8, u8) {
    let t = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let mix = |hi: f64, lo: f64| (hi + (lo - hi) * t).round() as u8;
    (mix(247.0, 8.0), mix(251.0, 48.0), mix(255.0, 107.0))
}

/// Self-contained SVG heatmap with every cell annotated to two decimals.
pub fn heatmap_svg(labels: &[String], values: &[Vec<f64>], title: &str) -> Result<String, ReportError> {
    let n = values.len();
    if values.iter().any(|r| r.len() != n) || labels.len() != n {
        return Err(ReportError::NotSquare);
    }
    let size = LABEL_SPACE + n * CELL + 20;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(s, "<rect width=\"{size}\" height=\"{size}\" fill=\"#ffffff\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"18\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        size / 2,
        xml_escape(title)
    );
    for (i, label) in labels.iter().enumerate() {
        let y = LABEL_SPACE + i * CELL + CELL / 2 + 4;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{y}\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            LABEL_SPACE - 6,
            xml_escape(label)
        );
        let x = LABEL_SPACE + i * CELL + CELL / 2;
        let _ = writeln!(
            s,
            "<text x=\"{x}\" y=\"{}\" font-size=\"11\" text-anchor=\"start\" transform=\"rotate(-60 {x} {})\">{}</text>",
            LABEL_SPACE - 6,
            LABEL_SPACE - 6,
            xml_escape(label)
        );
    }
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let (r, g, b) = ramp(v);
            let x = LABEL_SPACE + j * CELL;
            let y = LABEL_SPACE + i * CELL;
            let text_fill = if v.is_finite() && v > 0.5 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                s,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"#{r:02x}{g:02x}{b:02x}\" stroke=\"#cccccc\"/>"
            );
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" fill=\"{text_fill}\">{v:.2}</text>",
                x + CELL / 2,
                y + CELL / 2 + 4
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes `<base>.csv` and `<base>.svg`, returning both paths.
pub fn render_heatmap(
    labels: &[String],
    values: &[Vec<f64>],
    title: &str,
    out_base: &Path,
) -> Result<(PathBuf, PathBuf), ReportError> {
    let svg = heatmap_svg(labels, values, title)?;
    let csv_path = out_base.with_extension("csv");
    let svg_path = out_base.with_extension("svg");
    crate::util::write_atomic(&csv_path, matrix_csv(labels, values).as_bytes())?;
    crate::util::write_atomic(&svg_path, svg.as_bytes())?;
    Ok((csv_path, svg_path))
}
