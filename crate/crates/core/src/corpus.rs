//! Fortran/C++ translation-pair datasets: JSONL loading, normalization,
//! size filtering and persistence.
//!
//! Every pair is normalized at load time, so the text held in a [`Dataset`]
//! is what flows through embedding, prompting and scoring.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default Stack-style size window, in bytes of normalized Fortran.
pub const DEFAULT_MIN_BYTES: usize = 1000;
pub const DEFAULT_MAX_BYTES: usize = 10_000;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("normalization error: {0}")]
    Normalize(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lang {
    Fortran,
    Cpp,
}

/// One source/target translation pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodePair {
    pub id: String,
    pub fortran: String,
    /// Empty for unlabeled corpora.
    pub cpp: String,
    pub dataset: String,
    pub byte_len: usize,
}

impl CodePair {
    /// Builds a pair from already-normalized text.
    pub fn new(
        id: impl Into<String>,
        fortran: impl Into<String>,
        cpp: impl Into<String>,
        dataset: impl Into<String>,
    ) -> Self {
        let fortran = fortran.into();
        Self {
            id: id.into(),
            byte_len: fortran.len(),
            fortran,
            cpp: cpp.into(),
            dataset: dataset.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub pairs: Vec<CodePair>,
    pub labeled: bool,
}

impl Dataset {
    pub fn new(name: impl Into<String>, pairs: Vec<CodePair>) -> Self {
        let labeled = pairs.iter().all(|p| !p.cpp.is_empty());
        Self {
            name: name.into(),
            pairs,
            labeled,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CodePair> {
        self.pairs.iter().find(|p| p.id == id)
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: String,
    fortran: String,
    #[serde(default)]
    cpp: Option<String>,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    fortran: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    cpp: Option<&'a str>,
}

/// Loads a JSONL dataset, normalizing both sides of every pair.
///
/// Blank lines are skipped. `labeled` is true only when every record carries
/// a non-empty `cpp` field (vacuously true for an empty file).
pub fn load_dataset(path: impl AsRef<Path>, name: &str) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    let mut labeled = true;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(rec.id.clone()) {
            return Err(CorpusError::Integrity(format!(
                "duplicate id {:?} at line {line_no}",
                rec.id
            )));
        }
        let fortran = normalize_code(&rec.fortran, Lang::Fortran)
            .map_err(|e| CorpusError::Normalize(format!("line {line_no}: {e}")))?;
        if fortran.trim().is_empty() {
            return Err(CorpusError::Integrity(format!(
                "record {:?} at line {line_no} has empty fortran after normalization",
                rec.id
            )));
        }
        let cpp = match rec.cpp {
            Some(c) => {
                normalize_code(&c, Lang::Cpp).map_err(|e| CorpusError::Normalize(format!("line {line_no}: {e}")))?
            }
            None => String::new(),
        };
        if cpp.trim().is_empty() {
            labeled = false;
        }
        pairs.push(CodePair::new(rec.id, fortran, cpp, name));
    }
    Ok(Dataset {
        name: name.to_string(),
        pairs,
        labeled,
    })
}

/// Writes a dataset as JSONL through a temp file and rename.
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut buf = Vec::new();
    for p in &ds.pairs {
        let rec = OutRecord {
            id: &p.id,
            fortran: &p.fortran,
            cpp: (!p.cpp.is_empty()).then_some(p.cpp.as_str()),
        };
        serde_json::to_writer(&mut buf, &rec).expect("serializing strings cannot fail");
        buf.push(b'\n');
    }
    crate::util::write_atomic(path.as_ref(), &buf).map_err(|source| CorpusError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })
}

/// Keeps pairs whose normalized Fortran size lies in `[min_bytes, max_bytes]`.
pub fn filter_by_size(ds: &Dataset, min_bytes: usize, max_bytes: usize) -> Result<Dataset, CorpusError> {
    if min_bytes > max_bytes {
        return Err(CorpusError::Argument(format!(
            "min_bytes {min_bytes} exceeds max_bytes {max_bytes}"
        )));
    }
    let pairs: Vec<CodePair> = ds
        .pairs
        .iter()
        .filter(|p| (min_bytes..=max_bytes).contains(&p.byte_len))
        .cloned()
        .collect();
    Ok(Dataset {
        name: ds.name.clone(),
        labeled: pairs.iter().all(|p| !p.cpp.is_empty()),
        pairs,
    })
}

/// Strips comments and canonicalizes whitespace.
///
/// Lines that held only a comment are dropped rather than left blank. Tabs
/// become four spaces, trailing whitespace is trimmed, and runs of blank
/// lines collapse to a single blank line. A trailing newline is kept iff the
/// input had one.
pub fn normalize_code(code: &str, lang: Lang) -> Result<String, CorpusError> {
    let stripped = match lang {
        Lang::Fortran => strip_fortran_comments(code),
        Lang::Cpp => strip_cpp_comments(code)?,
    };
    let originals: Vec<&str> = code.split('\n').collect();
    let mut out: Vec<String> = Vec::new();
    let mut prev_blank = false;
    for (i, line) in stripped.split('\n').enumerate() {
        let line = line.replace('\t', "    ");
        let line = line.trim_end();
        if line.is_empty() {
            // comment-only line
            if originals.get(i).is_some_and(|o| !o.trim().is_empty()) {
                continue;
            }
            if prev_blank {
                continue;
            }
            prev_blank = true;
        } else {
            prev_blank = false;
        }
        out.push(line.to_string());
    }
    // split() on a newline-terminated string yields a trailing "" which the
    // loop above keeps as a blank line; turn it back into the terminator.
    let mut text = out.join("\n");
    if code.ends_with('\n') && !text.is_empty() && !text.ends_with('\n') {
        text.push('\n');
    }
    Ok(text)
}

fn is_fixed_form_comment(line: &str) -> bool {
    let mut chars = line.chars();
    match chars.next() {
        Some('*') => true,
        Some('C') | Some('c') => match chars.next() {
            None => true,
            Some(n) => !(n.is_ascii_alphanumeric() || n == '_'),
        },
        _ => false,
    }
}

fn strip_fortran_comments(code: &str) -> String {
    let mut out = String::with_capacity(code.len());
    for (i, line) in code.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if is_fixed_form_comment(line) {
            continue;
        }
        let mut quote: Option<char> = None;
        for ch in line.chars() {
            match quote {
                Some(q) => {
                    if ch == q {
                        quote = None;
                    }
                }
                None => {
                    if ch == '!' {
                        break;
                    }
                    if ch == '\'' || ch == '"' {
                        quote = Some(ch);
                    }
                }
            }
            out.push(ch);
        }
    }
    out
}

fn strip_cpp_comments(code: &str) -> Result<String, CorpusError> {
    let bytes: Vec<char> = code.chars().collect();
    let mut out = String::with_capacity(code.len());
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            '"' | '\'' => {
                out.push(c);
                i += 1;
                while i < bytes.len() {
                    let d = bytes[i];
                    out.push(d);
                    i += 1;
                    if d == '\\' && i < bytes.len() {
                        out.push(bytes[i]);
                        i += 1;
                    } else if d == c || d == '\n' {
                        break;
                    }
                }
            }
            '/' if bytes.get(i + 1) == Some(&'/') => {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                }
            }
            '/' if bytes.get(i + 1) == Some(&'*') => {
                let start = i;
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        let line = bytes[..start].iter().filter(|&&c| c == '\n').count() + 1;
                        return Err(CorpusError::Normalize(format!(
                            "unterminated block comment starting on line {line}"
                        )));
                    }
                    if bytes[i] == '*' && bytes[i + 1] == '/' {
                        i += 2;
                        break;
                    }
                    // keep line structure intact
                    if bytes[i] == '\n' {
                        out.push('\n');
                    }
                    i += 1;
                }
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    Ok(out)
}
