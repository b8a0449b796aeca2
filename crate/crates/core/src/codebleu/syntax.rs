//! Bracket-nesting statement tree and subtree-multiset syntax match.
//!
//! The parser never fails. Brackets open group nodes (`()`, `[]`, `{}`);
//! inside a group, tokens accumulate into a statement leaf that closes on `;`
//! or when a nested group starts. Leaf labels abstract identifiers, numbers
//! and strings so that renaming does not change the tree.

use std::collections::BTreeMap;

use super::tokenize::{tokenize, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Root,
    Group(char),
    Stmt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructNode {
    pub kind: NodeKind,
    /// Abstracted token sequence; empty for group and root nodes.
    pub leaf: Vec<String>,
    pub children: Vec<StructNode>,
}

impl StructNode {
    fn new(kind: NodeKind) -> Self {
        Self {
            kind,
            leaf: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            NodeKind::Root => "root".to_string(),
            NodeKind::Group(open) => format!("{open}{}", closer(*open)),
            NodeKind::Stmt => format!("stmt[{}]", self.leaf.join(" ")),
        }
    }

    /// Canonical S-expression of the subtree rooted here.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        self.write_sexp(&mut s);
        s
    }

    fn write_sexp(&self, out: &mut String) {
        if self.children.is_empty() {
            out.push_str(&self.label());
            return;
        }
        out.push('(');
        out.push_str(&self.label());
        for c in &self.children {
            out.push(' ');
            c.write_sexp(out);
        }
        out.push(')');
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructTree {
    pub root: StructNode,
    /// Number of bracket repairs made while parsing (stray or missing closers).
    pub repairs: usize,
}

impl StructTree {
    /// Serializations of every non-root subtree, as a counted multiset.
    pub fn subtrees(&self) -> BTreeMap<String, usize> {
        fn walk(n: &StructNode, out: &mut BTreeMap<String, usize>) {
            for c in &n.children {
                *out.entry(c.serialize()).or_default() += 1;
                walk(c, out);
            }
        }
        let mut out = BTreeMap::new();
        walk(&self.root, &mut out);
        out
    }

    /// Leaf token labels in document order.
    pub fn leaf_sequence(&self) -> Vec<String> {
        fn walk(n: &StructNode, out: &mut Vec<String>) {
            out.extend(n.leaf.iter().cloned());
            for c in &n.children {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

fn closer(open: char) -> char {
    match open {
        '(' => ')',
        '[' => ']',
        _ => '}',
    }
}

pub fn abstract_token(t: &Token) -> String {
    match t.kind {
        TokenKind::Identifier => "IDENT".to_string(),
        TokenKind::Number => "NUM".to_string(),
        TokenKind::String => "STR".to_string(),
        _ => t.text.clone(),
    }
}

pub fn parse_struct(code: &str) -> StructTree {
    parse_tokens(&tokenize(code))
}

pub fn parse_tokens(tokens: &[Token]) -> StructTree {
    // stack[0] is the root; pending[i] is the open statement at depth i
    let mut stack = vec![StructNode::new(NodeKind::Root)];
    let mut pending: Vec<Vec<String>> = vec![Vec::new()];
    let mut repairs = 0usize;

    fn flush(node: &mut StructNode, pending: &mut Vec<String>) {
        if !pending.is_empty() {
            let mut leaf = StructNode::new(NodeKind::Stmt);
            leaf.leaf = std::mem::take(pending);
            node.children.push(leaf);
        }
    }

    fn close_top(stack: &mut Vec<StructNode>, pending: &mut Vec<Vec<String>>) {
        let mut node = stack.pop().expect("non-root group");
        let mut p = pending.pop().expect("pending per level");
        flush(&mut node, &mut p);
        stack.last_mut().expect("root remains").children.push(node);
    }

    for t in tokens {
        let text = t.text.as_str();
        if t.kind == TokenKind::Punct && matches!(text, "(" | "[" | "{") {
            let depth = stack.len() - 1;
            flush(&mut stack[depth], &mut pending[depth]);
            stack.push(StructNode::new(NodeKind::Group(text.chars().next().unwrap())));
            pending.push(Vec::new());
        } else if t.kind == TokenKind::Punct && matches!(text, ")" | "]" | "}") {
            let want = text.chars().next().unwrap();
            let pos = stack
                .iter()
                .rposition(|n| matches!(n.kind, NodeKind::Group(o) if closer(o) == want));
            match pos {
                Some(p) => {
                    // groups opened inside the matching one are closed implicitly
                    while stack.len() - 1 > p {
                        close_top(&mut stack, &mut pending);
                        repairs += 1;
                    }
                    close_top(&mut stack, &mut pending);
                }
                None => repairs += 1,
            }
        } else {
            let depth = stack.len() - 1;
            pending[depth].push(abstract_token(t));
            if t.kind == TokenKind::Punct && text == ";" {
                flush(&mut stack[depth], &mut pending[depth]);
            }
        }
    }
    while stack.len() > 1 {
        close_top(&mut stack, &mut pending);
        repairs += 1;
    }
    let mut root = stack.pop().unwrap();
    let mut rest = pending.pop().unwrap();
    flush(&mut root, &mut rest);
    StructTree { root, repairs }
}

/// `|cand ∩ ref| / |ref|` over non-root subtree multisets.
pub fn syntax_match(candidate: &StructTree, reference: &StructTree) -> f64 {
    let cand = candidate.subtrees();
    let refs = reference.subtrees();
    let total: usize = refs.values().sum();
    if total == 0 {
        return if cand.is_empty() { 1.0 } else { 0.0 };
    }
    let hits: usize = refs.iter().map(|(k, &r)| cand.get(k).map_or(0, |&c| c.min(r))).sum();
    hits as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renamed_statements_share_tree() {
        assert_eq!(parse_struct("a = b;"), parse_struct("x = y;"));
    }

    #[test]
    fn if_block_shape() {
        let t = parse_struct("if (a) { b = 1; }");
        let kinds: Vec<&NodeKind> = t.root.children.iter().map(|c| &c.kind).collect();
        assert_eq!(kinds, [&NodeKind::Stmt, &NodeKind::Group('('), &NodeKind::Group('{')]);
        let brace = &t.root.children[2];
        assert_eq!(brace.children.len(), 1);
        assert_eq!(brace.children[0].kind, NodeKind::Stmt);
        assert_eq!(brace.children[0].leaf, ["IDENT", "=", "NUM", ";"]);
        assert_eq!(t.repairs, 0);
    }

    #[test]
    fn empty_code_gives_empty_root() {
        let t = parse_struct("");
        assert!(t.root.children.is_empty());
        assert!(t.subtrees().is_empty());
    }

    #[test]
    fn unbalanced_is_repaired() {
        let t = parse_struct("f(a, b; { x = 1;");
        assert_eq!(t.repairs, 2);
        let stray = parse_struct("x = 1; ) }");
        assert_eq!(stray.repairs, 2);
        let crossed = parse_struct("( [ a ) ]");
        // `)` closes `[` implicitly, then the trailing `]` is stray
        assert_eq!(crossed.repairs, 2);
    }

    #[test]
    fn leaves_reproduce_tokens_when_balanced() {
        let code = "for (int i = 0; i < n; i++) { s = s + x[i]; }";
        let expected: Vec<String> = tokenize(code)
            .iter()
            .filter(|t| !(t.kind == TokenKind::Punct && "()[]{}".contains(t.text.as_str())))
            .map(abstract_token)
            .collect();
        assert_eq!(parse_struct(code).leaf_sequence(), expected);
    }

    #[test]
    fn syntax_examples() {
        let a = parse_struct("for (i = 0; i < n; i++) { y = x; }");
        assert_eq!(syntax_match(&a, &a), 1.0);
        assert_eq!(syntax_match(&parse_struct("a = b;"), &parse_struct("a = c;")), 1.0);
        assert_eq!(syntax_match(&parse_struct("a = b;"), &parse_struct("if (a) { }")), 0.0);
        assert_eq!(syntax_match(&parse_struct(""), &parse_struct("")), 1.0);
        assert_eq!(syntax_match(&parse_struct("x;"), &parse_struct("")), 0.0);
    }
}
