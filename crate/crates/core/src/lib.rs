//! Retrieval-augmented few-shot code translation, Fortran to C++.
//!
//! The crate covers the whole offline pipeline: corpus ingestion and
//! normalization, code embeddings, exact vector retrieval, prompt assembly,
//! model invocation (HTTP or a deterministic mock), CodeBLEU scoring and
//! result reporting.

pub mod codebleu;
pub mod corpus;
pub mod embedding;
pub mod evaluate;
pub mod llmclient;
pub mod pipeline;
pub mod prompting;
pub mod report;
pub mod util;
pub mod vectorstore;

pub use codebleu::{codebleu, CodeBleuScore, Weights};
pub use corpus::{CodePair, Dataset, Lang};
pub use embedding::{EmbeddingBackendConfig, EmbeddingVector};
pub use prompting::Prompt;
pub use vectorstore::{Metric, Order, RetrievedExample, VectorStore};
