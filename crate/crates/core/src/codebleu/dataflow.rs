//! Heuristic def-use edges from assignment statements.
//!
//! Statements end at `;`, `{`, `}` or a line break. A statement is an
//! assignment when it contains a plain `=` outside any parentheses or
//! brackets. A closer with no opener in the statement (the tail of a
//! `for (...)` header, say) restarts the left-hand side. The last
//! identifier left of that `=` is the definition and
//! every identifier to its right is a use. Identifiers are renamed `var_i`
//! in order of first appearance over the whole snippet.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::tokenize::{tokenize_spanned, SpannedToken, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataflowEdge {
    pub def_var: String,
    pub use_var: String,
}

/// Edge multiset, kept as counts in a sorted map for deterministic iteration.
pub type EdgeMultiset = BTreeMap<DataflowEdge, usize>;

pub fn extract_dataflow(code: &str) -> EdgeMultiset {
    let tokens = tokenize_spanned(code);
    let mut names: HashMap<&str, usize> = HashMap::new();
    for t in &tokens {
        if t.token.kind == TokenKind::Identifier {
            let next = names.len();
            names.entry(t.token.text.as_str()).or_insert(next);
        }
    }
    let var = |s: &str| format!("var_{}", names[s]);

    let mut edges = EdgeMultiset::new();
    for stmt in statements(&tokens) {
        let mut depth = 0i32;
        let mut lhs_start = 0;
        let mut split = None;
        for (i, t) in stmt.iter().enumerate() {
            match t.token.text.as_str() {
                "(" | "[" => depth += 1,
                ")" | "]" if depth == 0 => lhs_start = i + 1,
                ")" | "]" => depth -= 1,
                "=" if depth == 0 && t.token.kind == TokenKind::Operator => {
                    split = Some(i);
                    break;
                }
                _ => {}
            }
        }
        let Some(eq) = split else { continue };
        let Some(def) = stmt[lhs_start..eq]
            .iter()
            .rev()
            .find(|t| t.token.kind == TokenKind::Identifier)
        else {
            continue;
        };
        let def_var = var(&def.token.text);
        for u in stmt[eq + 1..].iter().filter(|t| t.token.kind == TokenKind::Identifier) {
            *edges
                .entry(DataflowEdge {
                    def_var: def_var.clone(),
                    use_var: var(&u.token.text),
                })
                .or_default() += 1;
        }
    }
    edges
}

fn statements(tokens: &[SpannedToken]) -> Vec<&[SpannedToken]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..tokens.len() {
        let t = &tokens[i];
        let breaks_before = i > start && tokens[i - 1].line != t.line;
        if breaks_before {
            out.push(&tokens[start..i]);
            start = i;
        }
        if t.token.kind == TokenKind::Punct && matches!(t.token.text.as_str(), ";" | "{" | "}") {
            out.push(&tokens[start..i]);
            start = i + 1;
        }
    }
    out.push(&tokens[start..]);
    out.retain(|s| !s.is_empty());
    out
}

pub fn edge_count(edges: &EdgeMultiset) -> usize {
    edges.values().sum()
}

/// `|cand ∩ ref| / |ref|`, or `None` when the reference has no edges.
pub fn dataflow_match(candidate: &EdgeMultiset, reference: &EdgeMultiset) -> Option<f64> {
    let total = edge_count(reference);
    if total == 0 {
        return None;
    }
    let hits: usize = reference
        .iter()
        .map(|(e, &r)| candidate.get(e).map_or(0, |&c| c.min(r)))
        .sum();
    Some(hits as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(d: usize, u: usize) -> DataflowEdge {
        DataflowEdge {
            def_var: format!("var_{d}"),
            use_var: format!("var_{u}"),
        }
    }

    #[test]
    fn for_header_closer_restarts_lhs() {
        let e = extract_dataflow("for (int i = 0; i < n; i++) s = s + x[i];");
        // i=var_0, n=var_1, s=var_2, x=var_3
        let want: Vec<(&str, &str)> = vec![("var_2", "var_0"), ("var_2", "var_2"), ("var_2", "var_3")];
        let got: Vec<(&str, &str)> = e.keys().map(|k| (k.def_var.as_str(), k.use_var.as_str())).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn simple_assignment() {
        let e = extract_dataflow("a = b + c;");
        let expected: EdgeMultiset = [(edge(0, 1), 1), (edge(0, 2), 1)].into_iter().collect();
        assert_eq!(e, expected);
    }

    #[test]
    fn no_assignments() {
        assert!(extract_dataflow("if (a == b) { f(x); }").is_empty());
        assert!(extract_dataflow("x += 1; y <= z;").is_empty());
    }

    #[test]
    fn renaming_invariance() {
        assert_eq!(extract_dataflow("x = y; p = q;"), extract_dataflow("u = v; s = t;"));
    }

    #[test]
    fn declaration_and_index_lhs() {
        // last identifier on the left is the definition
        let e = extract_dataflow("double s = x[i] * y;");
        assert_eq!(edge_count(&e), 3);
        assert!(e.keys().all(|k| k.def_var == "var_0"));
    }

    #[test]
    fn paren_assignment_is_not_top_level() {
        assert!(extract_dataflow("for (i = 0").is_empty());
    }

    #[test]
    fn newline_splits_statements() {
        let e = extract_dataflow("a = b\nc = d");
        let expected: EdgeMultiset = [(edge(0, 1), 1), (edge(2, 3), 1)].into_iter().collect();
        assert_eq!(e, expected);
    }

    #[test]
    fn match_examples() {
        let r = extract_dataflow("a=b; c=d;");
        assert_eq!(dataflow_match(&r, &r), Some(1.0));
        assert_eq!(dataflow_match(&extract_dataflow("a=b;"), &r), Some(0.5));
        assert_eq!(dataflow_match(&r, &extract_dataflow("f(x);")), None);
    }

    #[test]
    fn repeated_uses_count_as_multiset() {
        let e = extract_dataflow("r = r + x * x;");
        assert_eq!(e[&edge(0, 0)], 1);
        assert_eq!(e[&edge(0, 1)], 2);
    }
}
