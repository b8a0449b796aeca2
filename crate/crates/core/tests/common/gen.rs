//! Seeded random code snippets for the oracle and property suites.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{data_path, hpc_mini, nr_mini};

const VOCAB: &[&str] = &[
    "int", "double", "float", "return", "for", "if", "else", "while", "const", "void", "a", "b", "c", "x", "y", "i",
    "n", "sum", "=", "+", "-", "*", "/", "==", "<", "<=", "+=", "++", "(", ")", "{", "}", "[", "]", ";", ",", "0", "1",
    "2", "0.5", "1e-3", "\"s;t\"", "'c'", "\n", "\n",
];

/// Whitespace-joined draw from a small C-like vocabulary; brackets are
/// frequently unbalanced.
pub fn token_soup(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    let len = rng.gen_range(0..=max_len);
    let mut out = String::new();
    for _ in 0..len {
        let t = VOCAB.choose(rng).unwrap();
        out.push_str(t);
        if *t != "\n" {
            out.push(' ');
        }
    }
    out
}

/// Every code side of every bundled corpus, labeled or not.
pub fn corpus_snippets() -> Vec<String> {
    let mut out = Vec::new();
    for ds in [hpc_mini(), nr_mini()] {
        for p in ds.pairs {
            out.push(p.cpp);
            out.push(p.fortran);
        }
    }
    let stack = ragxlate::corpus::load_dataset(data_path("stack_mini.jsonl"), "stack_mini").unwrap();
    out.extend(stack.pairs.into_iter().map(|p| p.fortran));
    out
}

/// A random contiguous run of lines (possibly the whole snippet).
pub fn line_window(rng: &mut ChaCha8Rng, code: &str) -> String {
    let lines: Vec<&str> = code.lines().collect();
    if lines.is_empty() {
        return String::new();
    }
    let a = rng.gen_range(0..lines.len());
    let b = rng.gen_range(a..lines.len());
    lines[a..=b].join("\n")
}

/// Deletes, duplicates, swaps or renames pieces of `code`.
pub fn mutate(rng: &mut ChaCha8Rng, code: &str) -> String {
    let mut lines: Vec<String> = code.lines().map(String::from).collect();
    let edits = rng.gen_range(1..=4);
    for _ in 0..edits {
        if lines.is_empty() {
            break;
        }
        let i = rng.gen_range(0..lines.len());
        match rng.gen_range(0..5) {
            0 => {
                lines.remove(i);
            }
            1 => {
                let l = lines[i].clone();
                lines.insert(i, l);
            }
            2 => {
                let j = rng.gen_range(0..lines.len());
                lines.swap(i, j);
            }
            3 => {
                let mut words: Vec<String> = lines[i].split(' ').map(String::from).collect();
                if !words.is_empty() {
                    let w = rng.gen_range(0..words.len());
                    words.remove(w);
                }
                lines[i] = words.join(" ");
            }
            _ => {
                lines[i] = lines[i].replace('i', "k").replace("x[", "z[");
            }
        }
    }
    lines.join("\n")
}

/// Candidate/reference pair mixing corpus windows, mutations and soup.
pub fn snippet_pair(rng: &mut ChaCha8Rng, pool: &[String]) -> (String, String) {
    let base = pool.choose(rng).unwrap();
    let reference = match rng.gen_range(0..3) {
        0 => token_soup(rng, 40),
        1 => line_window(rng, base),
        _ => base.clone(),
    };
    let candidate = match rng.gen_range(0..4) {
        0 => token_soup(rng, 40),
        1 => {
            let other = pool.choose(rng).unwrap();
            line_window(rng, other)
        }
        _ => mutate(rng, &reference),
    };
    (candidate, reference)
}
