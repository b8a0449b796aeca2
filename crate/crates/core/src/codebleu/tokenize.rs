//! Total, lossy C-family tokenizer shared by all metric components and by the
//! embedding truncation logic.

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

const KEYWORDS_FILE: &str = include_str!("../../data/cpp_keywords.txt");

/// Multi-character operators, longest first so matching is greedy.
const MULTI_OPS: &[&str] = &[
    "<<=", ">>=", "->*", "...", "<=>", "::", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", ".*",
];
const SINGLE_OPS: &str = "+-*/%=<>!&|^~?:.";
const PUNCT: &str = ";,(){}[]#";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Keyword,
    Identifier,
    Number,
    String,
    Operator,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
}

impl Token {
    pub fn new(text: impl Into<String>, kind: TokenKind) -> Self {
        Self {
            text: text.into(),
            kind,
        }
    }
}

/// A token with its byte span and 0-based line in the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpannedToken {
    pub token: Token,
    pub start: usize,
    pub end: usize,
    pub line: usize,
}

/// Version tag and word set parsed from the shipped keyword list.
pub fn keyword_list() -> &'static (String, HashSet<&'static str>) {
    static KW: OnceLock<(String, HashSet<&'static str>)> = OnceLock::new();
    KW.get_or_init(|| {
        let mut version = String::from("unversioned");
        let mut set = HashSet::new();
        for line in KEYWORDS_FILE.lines() {
            let line = line.trim();
            if let Some(v) = line.strip_prefix("# version:") {
                version = v.trim().to_string();
            } else if !line.is_empty() && !line.starts_with('#') {
                set.insert(line);
            }
        }
        (version, set)
    })
}

pub fn is_keyword(word: &str) -> bool {
    keyword_list().1.contains(word)
}

pub fn tokenize(code: &str) -> Vec<Token> {
    tokenize_spanned(code).into_iter().map(|t| t.token).collect()
}

pub fn tokenize_spanned(code: &str) -> Vec<SpannedToken> {
    let chars: Vec<(usize, char)> = code.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(code.len(), |&(b, _)| b);
    let mut out = Vec::new();
    let mut line = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i].1;
        if c == '\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let start_line = line;
        let kind;
        if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let word = &code[byte_at(start)..byte_at(i)];
            kind = if is_keyword(word) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|&(_, d)| d.is_ascii_digit())) {
            let hex = c == '0' && chars.get(i + 1).is_some_and(|&(_, x)| x == 'x' || x == 'X');
            i += 1;
            while i < chars.len() {
                let d = chars[i].1;
                let prev = chars[i - 1].1;
                let exponent_sign = (d == '+' || d == '-') && !hex && (prev == 'e' || prev == 'E');
                if d.is_ascii_alphanumeric() || d == '_' || d == '.' || d == '\'' || exponent_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            kind = TokenKind::Number;
        } else if c == '"' || c == '\'' {
            i += 1;
            while i < chars.len() {
                let d = chars[i].1;
                if d == '\\' {
                    if chars.get(i + 1).is_some_and(|&(_, n)| n == '\n') {
                        line += 1;
                    }
                    i += 2;
                    continue;
                }
                if d == '\n' {
                    break;
                }
                i += 1;
                if d == c {
                    break;
                }
            }
            i = i.min(chars.len());
            kind = TokenKind::String;
        } else if let Some(op) = MULTI_OPS.iter().find(|op| code[byte_at(i)..].starts_with(**op)) {
            i += op.chars().count();
            kind = TokenKind::Operator;
        } else if SINGLE_OPS.contains(c) {
            i += 1;
            kind = TokenKind::Operator;
        } else {
            // PUNCT and anything unrecognised
            debug_assert!(PUNCT.contains(c) || !c.is_ascii_alphanumeric());
            i += 1;
            kind = TokenKind::Punct;
        }
        let (s, e) = (byte_at(start), byte_at(i));
        out.push(SpannedToken {
            token: Token::new(&code[s..e], kind),
            start: s,
            end: e,
            line: start_line,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenKind::*;

    fn kinds(code: &str) -> Vec<(std::string::String, TokenKind)> {
        tokenize(code).into_iter().map(|t| (t.text, t.kind)).collect()
    }

    #[test]
    fn simple_declaration() {
        assert_eq!(
            kinds("int a = 1;"),
            vec![
                ("int".into(), Keyword),
                ("a".into(), Identifier),
                ("=".into(), Operator),
                ("1".into(), Number),
                (";".into(), Punct),
            ]
        );
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t ").is_empty());
    }

    #[test]
    fn string_literal_is_one_token() {
        assert_eq!(kinds("\"x;y\""), vec![("\"x;y\"".into(), String)]);
        assert_eq!(
            kinds("'a' \"q\\\"r\""),
            vec![("'a'".into(), String), ("\"q\\\"r\"".into(), String)]
        );
    }

    #[test]
    fn numbers_and_operators() {
        assert_eq!(
            kinds("x+=1.5e-3f;y->z<<=0x1F"),
            vec![
                ("x".into(), Identifier),
                ("+=".into(), Operator),
                ("1.5e-3f".into(), Number),
                (";".into(), Punct),
                ("y".into(), Identifier),
                ("->".into(), Operator),
                ("z".into(), Identifier),
                ("<<=".into(), Operator),
                ("0x1F".into(), Number),
            ]
        );
    }

    #[test]
    fn hex_does_not_swallow_minus() {
        assert_eq!(
            kinds("0xE-1"),
            vec![("0xE".into(), Number), ("-".into(), Operator), ("1".into(), Number)]
        );
    }

    #[test]
    fn unterminated_string_stops_at_newline() {
        let t = tokenize_spanned("\"abc\nx");
        assert_eq!(t[0].token.kind, String);
        assert_eq!(t[0].token.text, "\"abc");
        assert_eq!(t[1].line, 1);
    }

    #[test]
    fn spans_and_lines() {
        let t = tokenize_spanned("a = b;\n  c");
        assert_eq!((t[0].start, t[0].end, t[0].line), (0, 1, 0));
        let c = t.last().unwrap();
        assert_eq!((c.token.text.as_str(), c.start, c.line), ("c", 9, 1));
    }

    #[test]
    fn keyword_list_is_versioned() {
        let (version, set) = keyword_list();
        assert_eq!(version, "1");
        assert!(set.contains("return") && set.contains("while"));
        assert!(!set.contains("std"));
    }

    #[test]
    fn keyword_iff_listed() {
        for t in tokenize("for (auto x : xs) { if (x) return std::move(x); }") {
            assert_eq!(t.kind == Keyword, is_keyword(&t.text), "{}", t.text);
        }
    }
}
