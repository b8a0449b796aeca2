//! Zero-shot and k-shot translation prompts.
//!
//! Templates are fixed strings; code is interpolated verbatim. Few-shot
//! prompts drop examples from the least-similar end until the estimated
//! token count fits the context budget.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebleu::tokenize::tokenize;
use crate::corpus::CodePair;
use crate::vectorstore::RetrievedExample;

pub const SYSTEM_PROMPT: &str = "You are adept at translating Fortran code into CPP with high accuracy, ensuring that all syntax, semantics, and specific language features are correctly and efficiently converted";
pub const ZERO_SHOT_LEAD: &str = "Translate the following code from Fortran to CPP:\n";
pub const EXAMPLE_HEADER: &str = "Here's an example of a code translated from Fortran to CPP:\n";
pub const EXAMPLE_SOURCE: &str = "Here's the Fortran code:\n";
pub const EXAMPLE_TARGET: &str = "Here's the CPP translation:\n";
pub const FEW_SHOT_LEAD: &str = "Now translate the following code from Fortran to CPP:\n";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("query {0:?} has empty Fortran source")]
    EmptyQuery(String),
    #[error("query {query_id:?} alone needs ~{needed} tokens, budget is {budget}")]
    ContextOverflow {
        query_id: String,
        needed: usize,
        budget: usize,
    },
    #[error("example {0:?} is the query itself")]
    SelfExample(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub user: String,
    pub shots: usize,
    pub example_ids: Vec<String>,
    pub est_tokens: usize,
}

impl Prompt {
    /// `System: ...` / `User: ...` transcript, the layout used by the golden files.
    pub fn transcript(&self) -> String {
        format!("System: {}\nUser: {}\n", self.system, self.user)
    }
}

/// Order in which examples are laid out in the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleOrder {
    #[default]
    MostSimilarFirst,
    MostSimilarLast,
}

impl std::str::FromStr for ExampleOrder {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "most_similar_first" | "first" => Ok(Self::MostSimilarFirst),
            "most_similar_last" | "last" => Ok(Self::MostSimilarLast),
            o => Err(format!("unknown example order {o:?}")),
        }
    }
}

/// Tokenizer count scaled by 1.3, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    (tokenize(text).len() * 13).div_ceil(10)
}

fn prompt_tokens(user: &str) -> usize {
    estimate_tokens(SYSTEM_PROMPT) + estimate_tokens(user)
}

pub fn build_zero_shot(query: &CodePair) -> Result<Prompt, PromptError> {
    if query.fortran.trim().is_empty() {
        return Err(PromptError::EmptyQuery(query.id.clone()));
    }
    let user = format!("{ZERO_SHOT_LEAD}{}", query.fortran);
    Ok(Prompt {
        system: SYSTEM_PROMPT.to_string(),
        est_tokens: prompt_tokens(&user),
        user,
        shots: 0,
        example_ids: Vec::new(),
    })
}

fn example_block(e: &RetrievedExample) -> String {
    format!(
        "{EXAMPLE_HEADER}{EXAMPLE_SOURCE}{}\n{EXAMPLE_TARGET}{}\n",
        e.fortran, e.cpp
    )
}

pub fn build_few_shot(
    query: &CodePair,
    examples: &[RetrievedExample],
    max_context_tokens: usize,
) -> Result<Prompt, PromptError> {
    build_few_shot_ordered(query, examples, max_context_tokens, ExampleOrder::MostSimilarFirst)
}

/// `examples` must be ranked best-first; trimming always removes the
/// worst-ranked example regardless of the layout order.
pub fn build_few_shot_ordered(
    query: &CodePair,
    examples: &[RetrievedExample],
    max_context_tokens: usize,
    order: ExampleOrder,
) -> Result<Prompt, PromptError> {
    if query.fortran.trim().is_empty() {
        return Err(PromptError::EmptyQuery(query.id.clone()));
    }
    if let Some(e) = examples.iter().find(|e| e.pair_id == query.id) {
        return Err(PromptError::SelfExample(e.pair_id.clone()));
    }
    let mut ranked: Vec<&RetrievedExample> = examples.iter().collect();
    ranked.sort_by_key(|e| e.rank);
    let tail = format!("{FEW_SHOT_LEAD}{}", query.fortran);
    let base = prompt_tokens(&tail);
    if base > max_context_tokens {
        return Err(PromptError::ContextOverflow {
            query_id: query.id.clone(),
            needed: base,
            budget: max_context_tokens,
        });
    }
    let blocks: Vec<String> = ranked.iter().map(|e| example_block(e)).collect();
    let assemble = |keep: usize| -> (Vec<usize>, String) {
        let mut chosen: Vec<usize> = (0..keep).collect();
        if order == ExampleOrder::MostSimilarLast {
            chosen.reverse();
        }
        let mut user: String = chosen.iter().map(|&i| blocks[i].as_str()).collect();
        user.push_str(&tail);
        (chosen, user)
    };
    let mut keep = ranked.len();
    let (chosen, user) = loop {
        let (chosen, user) = assemble(keep);
        if keep == 0 || prompt_tokens(&user) <= max_context_tokens {
            break (chosen, user);
        }
        keep -= 1;
    };
    Ok(Prompt {
        system: SYSTEM_PROMPT.to_string(),
        est_tokens: prompt_tokens(&user),
        user,
        shots: keep,
        example_ids: chosen.iter().map(|&i| ranked[i].pair_id.clone()).collect(),
    })
}
