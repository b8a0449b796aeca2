//! Straightforward reference implementations used to cross-check the
//! library. They favour obviousness over speed: linear scans instead of
//! maps, recursion instead of explicit stacks.

use ragxlate::codebleu::tokenize::{tokenize_spanned, Token, TokenKind};
use ragxlate::vectorstore::{cosine_sim, l2_dist, Metric, Order, VectorRecord};

fn count_in<T: PartialEq>(xs: &[T], x: &T) -> usize {
    xs.iter().filter(|y| *y == x).count()
}

/// |a ∩ b| over multisets given as plain lists.
fn multiset_overlap<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut total = 0;
    for (i, x) in b.iter().enumerate() {
        if b[..i].contains(x) {
            continue;
        }
        total += count_in(a, x).min(count_in(b, x));
    }
    total
}

pub fn bleu(cand: &[Token], reference: &[Token], max_n: usize, kw_weight: f64) -> f64 {
    if cand.is_empty() {
        return if reference.is_empty() { 1.0 } else { 0.0 };
    }
    let mut product = 1.0;
    let mut used = 0;
    for n in 1..=max_n {
        if cand.len() < n {
            continue;
        }
        let grams = |ts: &[Token]| -> Vec<Vec<String>> {
            (0..=ts.len().saturating_sub(n))
                .filter(|&i| i + n <= ts.len())
                .map(|i| ts[i..i + n].iter().map(|t| t.text.clone()).collect())
                .collect()
        };
        let cg = grams(cand);
        let rg = grams(reference);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut matched_any = false;
        for (i, g) in cg.iter().enumerate() {
            if cg[..i].contains(g) {
                continue;
            }
            let has_kw = cand[i..i + n].iter().any(|t| t.kind == TokenKind::Keyword);
            let w = if has_kw { kw_weight } else { 1.0 };
            let c = count_in(&cg, g);
            let clipped = c.min(count_in(&rg, g));
            matched_any |= clipped > 0;
            num += w * clipped as f64;
            den += w * c as f64;
        }
        let p = if matched_any {
            num / den
        } else {
            1.0 / (2.0 * cg.len() as f64)
        };
        product *= p;
        used += 1;
    }
    let (c, r) = (cand.len() as f64, reference.len() as f64);
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    bp * product.powf(1.0 / used as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Group(char, Vec<Node>),
    Stmt(Vec<String>),
}

fn abstracted(t: &Token) -> String {
    match t.kind {
        TokenKind::Identifier => "IDENT".into(),
        TokenKind::Number => "NUM".into(),
        TokenKind::String => "STR".into(),
        _ => t.text.clone(),
    }
}

fn opener_for(closer: &str) -> char {
    match closer {
        ")" => '(',
        "]" => '[',
        _ => '{',
    }
}

fn parse_level(toks: &[Token], i: &mut usize, open: Option<char>, enclosing: &mut Vec<char>) -> Vec<Node> {
    let mut kids = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let flush = |kids: &mut Vec<Node>, pending: &mut Vec<String>| {
        if !pending.is_empty() {
            kids.push(Node::Stmt(std::mem::take(pending)));
        }
    };
    while *i < toks.len() {
        let t = &toks[*i];
        let punct = t.kind == TokenKind::Punct;
        match t.text.as_str() {
            "(" | "[" | "{" if punct => {
                flush(&mut kids, &mut pending);
                *i += 1;
                let ch = t.text.chars().next().unwrap();
                enclosing.push(ch);
                let inner = parse_level(toks, i, Some(ch), enclosing);
                enclosing.pop();
                kids.push(Node::Group(ch, inner));
            }
            ")" | "]" | "}" if punct => {
                let want = opener_for(&t.text);
                if open == Some(want) {
                    *i += 1;
                    flush(&mut kids, &mut pending);
                    return kids;
                }
                if enclosing.contains(&want) {
                    // an outer group closes; this one ends here
                    flush(&mut kids, &mut pending);
                    return kids;
                }
                *i += 1;
            }
            _ => {
                pending.push(abstracted(t));
                *i += 1;
                if punct && t.text == ";" {
                    flush(&mut kids, &mut pending);
                }
            }
        }
    }
    flush(&mut kids, &mut pending);
    kids
}

pub fn struct_tree(toks: &[Token]) -> Vec<Node> {
    let mut i = 0;
    parse_level(toks, &mut i, None, &mut Vec::new())
}

fn all_subtrees(nodes: &[Node], out: &mut Vec<String>) {
    for n in nodes {
        out.push(format!("{n:?}"));
        if let Node::Group(_, kids) = n {
            all_subtrees(kids, out);
        }
    }
}

pub fn syntax(cand: &[Token], reference: &[Token]) -> f64 {
    let mut c = Vec::new();
    let mut r = Vec::new();
    all_subtrees(&struct_tree(cand), &mut c);
    all_subtrees(&struct_tree(reference), &mut r);
    if r.is_empty() {
        return if c.is_empty() { 1.0 } else { 0.0 };
    }
    multiset_overlap(&c, &r) as f64 / r.len() as f64
}

pub fn dataflow_edges(code: &str) -> Vec<(usize, usize)> {
    let toks = tokenize_spanned(code);
    let mut names: Vec<&str> = Vec::new();
    for t in &toks {
        if t.token.kind == TokenKind::Identifier && !names.contains(&t.token.text.as_str()) {
            names.push(&t.token.text);
        }
    }
    let id = |s: &str| names.iter().position(|n| *n == s).unwrap();

    let mut stmts: Vec<Vec<&Token>> = Vec::new();
    let mut cur: Vec<&Token> = Vec::new();
    let mut prev_line = None;
    for t in &toks {
        if !cur.is_empty() && prev_line != Some(t.line) {
            stmts.push(std::mem::take(&mut cur));
        }
        prev_line = Some(t.line);
        if t.token.kind == TokenKind::Punct && [";", "{", "}"].contains(&t.token.text.as_str()) {
            stmts.push(std::mem::take(&mut cur));
        } else {
            cur.push(&t.token);
        }
    }
    stmts.push(cur);

    let mut edges = Vec::new();
    for s in stmts {
        let mut depth = 0;
        let mut lhs_from = 0;
        let mut eq = None;
        for (j, t) in s.iter().enumerate() {
            match t.text.as_str() {
                "(" | "[" => depth += 1,
                ")" | "]" => {
                    if depth == 0 {
                        lhs_from = j + 1;
                    } else {
                        depth -= 1;
                    }
                }
                "=" if depth == 0 && t.kind == TokenKind::Operator => {
                    eq = Some(j);
                    break;
                }
                _ => {}
            }
        }
        let Some(eq) = eq else { continue };
        let Some(def) = s[lhs_from..eq].iter().rev().find(|t| t.kind == TokenKind::Identifier) else {
            continue;
        };
        for u in s[eq + 1..].iter().filter(|t| t.kind == TokenKind::Identifier) {
            edges.push((id(&def.text), id(&u.text)));
        }
    }
    edges
}

pub fn dataflow(cand: &str, reference: &str) -> Option<f64> {
    let c = dataflow_edges(cand);
    let r = dataflow_edges(reference);
    if r.is_empty() {
        return None;
    }
    Some(multiset_overlap(&c, &r) as f64 / r.len() as f64)
}

/// Full scan: score everything, sort, cut.
pub fn rank(
    records: &[VectorRecord],
    query: &[f64],
    k: usize,
    metric: Metric,
    order: Order,
    exclude: &[String],
) -> Vec<(String, f64)> {
    let mut scored: Vec<(String, f64)> = records
        .iter()
        .filter(|r| !exclude.contains(&r.pair_id))
        .map(|r| {
            let s = match metric {
                Metric::Cosine => cosine_sim(query, &r.embedding.values).unwrap(),
                Metric::L2 => l2_dist(query, &r.embedding.values).unwrap(),
            };
            (r.pair_id.clone(), s)
        })
        .collect();
    // "better" means larger similarity or smaller distance, flipped for Farthest
    let larger_first = matches!(
        (metric, order),
        (Metric::Cosine, Order::Nearest) | (Metric::L2, Order::Farthest)
    );
    scored.sort_by(|a, b| {
        let by_score = if larger_first {
            b.1.total_cmp(&a.1)
        } else {
            a.1.total_cmp(&b.1)
        };
        by_score.then_with(|| a.0.cmp(&b.0))
    });
    scored.truncate(k);
    scored
}
