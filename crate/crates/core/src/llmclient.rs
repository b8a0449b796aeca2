//! Chat-completions client, a deterministic mock model, and the batch
//! translation driver.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CodePair;
use crate::embedding::Embedder;
use crate::prompting::{
    build_few_shot_ordered, build_zero_shot, ExampleOrder, Prompt, PromptError, EXAMPLE_HEADER, EXAMPLE_TARGET,
    FEW_SHOT_LEAD, ZERO_SHOT_LEAD,
};
use crate::util::with_retries;
use crate::vectorstore::{Metric, Order, RetrievalQuery, VectorStore};

pub const DEFAULT_API_KEY_ENV: &str = "RAGXLATE_LLM_API_KEY";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("contract error: {0}")]
    Contract(String),
    #[error("no code found in model response")]
    Extraction,
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Http,
    Mock,
}

fn default_max_output_tokens() -> usize {
    1024
}
fn default_context_tokens() -> usize {
    8192
}
fn default_timeout_secs() -> u64 {
    120
}
fn default_max_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_concurrency() -> usize {
    4
}
fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model_id: String,
    #[serde(default)]
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: usize,
    #[serde(default = "default_context_tokens")]
    pub context_tokens: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
}

impl ModelConfig {
    pub fn mock(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            kind: ModelKind::Mock,
            endpoint: None,
            temperature: 0.0,
            max_output_tokens: default_max_output_tokens(),
            context_tokens: default_context_tokens(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            backoff_ms: default_backoff_ms(),
            concurrency: default_concurrency(),
            api_key_env: default_api_key_env(),
        }
    }

    pub fn http(model_id: impl Into<String>, endpoint: impl Into<String>) -> Self {
        Self {
            kind: ModelKind::Http,
            endpoint: Some(endpoint.into()),
            ..Self::mock(model_id)
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::Config(format!("{}: temperature must be >= 0", self.model_id)));
        }
        if self.context_tokens == 0 {
            return Err(LlmError::Config(format!(
                "{}: context_tokens must be >= 1",
                self.model_id
            )));
        }
        if self.kind == ModelKind::Http && self.endpoint.is_none() {
            return Err(LlmError::Config(format!(
                "{}: http model needs an endpoint",
                self.model_id
            )));
        }
        Ok(())
    }

    /// Room left for the prompt once the output allowance is reserved.
    pub fn prompt_budget(&self) -> usize {
        self.context_tokens.saturating_sub(self.max_output_tokens)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationStatus {
    Ok,
    ContextOverflow,
    TransportFailure,
    /// Response arrived but was not usable (not JSON, or no code in it).
    InvalidResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationResult {
    pub query_id: String,
    pub model_id: String,
    /// Shots actually in the prompt.
    pub shots: usize,
    /// Shots asked for; differs from `shots` when the store or budget ran out.
    pub requested_shots: usize,
    #[serde(default)]
    pub example_ids: Vec<String>,
    /// Retrieval score of the rank-1 example, when any was retrieved.
    #[serde(default)]
    pub top_score: Option<f64>,
    pub raw_response: String,
    pub candidate_cpp: String,
    pub status: TranslationStatus,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl TranslationResult {
    fn key(&self) -> (String, String, usize) {
        (self.query_id.clone(), self.model_id.clone(), self.requested_shots)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
}

pub trait ChatModel: Send + Sync {
    fn complete(&self, prompt: &Prompt, cfg: &ModelConfig) -> Result<Completion, LlmError>;
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 2],
    temperature: f64,
    max_tokens: usize,
}

/// Exact request bytes for a prompt under `cfg`.
pub fn request_body(prompt: &Prompt, cfg: &ModelConfig) -> Vec<u8> {
    let req = ChatRequest {
        model: &cfg.model_id,
        messages: [
            ChatMessage {
                role: "system",
                content: &prompt.system,
            },
            ChatMessage {
                role: "user",
                content: &prompt.user,
            },
        ],
        temperature: cfg.temperature,
        max_tokens: cfg.max_output_tokens,
    };
    serde_json::to_vec(&req).expect("request serializes")
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: Option<String>,
}

pub struct HttpChatModel {
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

impl HttpChatModel {
    pub fn new(cfg: &ModelConfig) -> Result<Self, LlmError> {
        cfg.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(format!("http client: {e}")))?;
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(Self { client, api_key })
    }
}

impl ChatModel for HttpChatModel {
    fn complete(&self, prompt: &Prompt, cfg: &ModelConfig) -> Result<Completion, LlmError> {
        let endpoint = cfg
            .endpoint
            .as_deref()
            .ok_or_else(|| LlmError::Config("missing endpoint".into()))?;
        let body = request_body(prompt, cfg);
        let started = Instant::now();
        let text = with_retries(cfg.max_retries, cfg.backoff_ms, || {
            let mut req = self
                .client
                .post(endpoint)
                .header("content-type", "application/json")
                .body(body.clone());
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req.send().map_err(|e| (true, e.to_string()))?;
            let status = resp.status();
            let text = resp.text().map_err(|e| (true, e.to_string()))?;
            if status.is_success() {
                Ok(text)
            } else {
                let retryable = status.is_server_error() || status.as_u16() == 429;
                Err((
                    retryable,
                    format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()),
                ))
            }
        })
        .map_err(|f| LlmError::Transport {
            attempts: f.attempts,
            message: f.message,
        })?;
        let latency_ms = started.elapsed().as_millis() as u64;
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| LlmError::Contract(format!("response is not chat JSON: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Contract("response has no message content".into()))?;
        Ok(Completion {
            text: content,
            latency_ms,
        })
    }
}

/// Offline stand-in for a model.
///
/// Replies with a ```cpp fence holding, in order of preference: the last
/// fenced block of the user message; the C++ of the final example in the
/// prompt; the query's Fortran as-is.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockModel;

impl MockModel {
    pub fn echo(user: &str) -> String {
        if let Some(block) = last_fenced_block(user) {
            return block;
        }
        if let Some(pos) = user.rfind(EXAMPLE_TARGET) {
            let rest = &user[pos + EXAMPLE_TARGET.len()..];
            let end = [FEW_SHOT_LEAD, EXAMPLE_HEADER]
                .iter()
                .filter_map(|m| rest.find(m))
                .min()
                .unwrap_or(rest.len());
            // drop the separator newline the template adds after each example
            let shot = &rest[..end];
            return shot.strip_suffix('\n').unwrap_or(shot).to_string();
        }
        for lead in [FEW_SHOT_LEAD, ZERO_SHOT_LEAD] {
            if let Some(pos) = user.rfind(lead) {
                return user[pos + lead.len()..].to_string();
            }
        }
        user.to_string()
    }
}

impl ChatModel for MockModel {
    fn complete(&self, prompt: &Prompt, _cfg: &ModelConfig) -> Result<Completion, LlmError> {
        let body = Self::echo(&prompt.user);
        Ok(Completion {
            text: format!("```cpp\n{}\n```", body.trim_end_matches('\n')),
            latency_ms: 0,
        })
    }
}

pub fn model_for(cfg: &ModelConfig) -> Result<Box<dyn ChatModel>, LlmError> {
    cfg.validate()?;
    Ok(match cfg.kind {
        ModelKind::Mock => Box::new(MockModel),
        ModelKind::Http => Box::new(HttpChatModel::new(cfg)?),
    })
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn fenced_blocks(raw: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in raw.lines() {
        match current.as_mut() {
            None if is_fence(line) => current = Some(Vec::new()),
            None => {}
            Some(_) if is_fence(line) => blocks.push(current.take().unwrap().join("\n")),
            Some(lines) => lines.push(line),
        }
    }
    if let Some(lines) = current {
        blocks.push(lines.join("\n"));
    }
    blocks
}

fn last_fenced_block(text: &str) -> Option<String> {
    fenced_blocks(text).pop()
}

const CODE_PUNCT: &[char] = &[';', '{', '}', '(', ')', '[', ']', '=', '#', '<', '>'];

/// Pulls candidate code out of a model reply.
///
/// The first fenced block wins. Without a fence, leading and trailing lines
/// carrying none of `; { } ( ) [ ] = # < >` are treated as prose and cut;
/// if that would leave nothing, the trimmed reply is returned whole.
pub fn extract_code(raw: &str) -> Result<String, LlmError> {
    if raw.trim().is_empty() {
        return Err(LlmError::Extraction);
    }
    if raw.lines().any(is_fence) {
        let first = fenced_blocks(raw).into_iter().next().unwrap_or_default();
        if first.trim().is_empty() {
            return Err(LlmError::Extraction);
        }
        return Ok(first);
    }
    let lines: Vec<&str> = raw.lines().collect();
    let is_code = |l: &&str| l.contains(CODE_PUNCT);
    match (lines.iter().position(is_code), lines.iter().rposition(is_code)) {
        (Some(a), Some(b)) => Ok(lines[a..=b].join("\n")),
        _ => Ok(raw.trim().to_string()),
    }
}

fn base_result(query_id: &str, cfg: &ModelConfig, prompt: Option<&Prompt>, requested: usize) -> TranslationResult {
    TranslationResult {
        query_id: query_id.to_string(),
        model_id: cfg.model_id.clone(),
        shots: prompt.map_or(0, |p| p.shots),
        requested_shots: requested,
        example_ids: prompt.map(|p| p.example_ids.clone()).unwrap_or_default(),
        top_score: None,
        raw_response: String::new(),
        candidate_cpp: String::new(),
        status: TranslationStatus::Ok,
        latency_ms: 0,
        diagnostic: None,
    }
}

/// Sends one prompt. Transport failures and context overflow come back as
/// statuses; unusable responses are errors.
pub fn translate(
    query_id: &str,
    prompt: &Prompt,
    cfg: &ModelConfig,
    model: &dyn ChatModel,
) -> Result<TranslationResult, LlmError> {
    let mut out = base_result(query_id, cfg, Some(prompt), prompt.shots);
    if prompt.est_tokens + cfg.max_output_tokens > cfg.context_tokens {
        out.status = TranslationStatus::ContextOverflow;
        out.diagnostic = Some(format!(
            "prompt ~{} tokens + {} output exceeds context {}",
            prompt.est_tokens, cfg.max_output_tokens, cfg.context_tokens
        ));
        return Ok(out);
    }
    match model.complete(prompt, cfg) {
        Ok(c) => {
            out.latency_ms = c.latency_ms;
            out.candidate_cpp = extract_code(&c.text)?;
            out.raw_response = c.text;
            Ok(out)
        }
        Err(LlmError::Transport { attempts, message }) => {
            out.status = TranslationStatus::TransportFailure;
            out.diagnostic = Some(format!("after {attempts} attempt(s): {message}"));
            Ok(out)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetrievalSettings {
    pub metric: Metric,
    pub order: Order,
    pub example_order: ExampleOrder,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        Self {
            metric: Metric::Cosine,
            order: Order::Nearest,
            example_order: ExampleOrder::MostSimilarFirst,
        }
    }
}

pub struct ModelHandle {
    pub cfg: ModelConfig,
    pub model: Box<dyn ChatModel>,
}

impl ModelHandle {
    pub fn new(cfg: ModelConfig) -> Result<Self, LlmError> {
        let model = model_for(&cfg)?;
        Ok(Self { cfg, model })
    }
}

fn run_one(
    query: &CodePair,
    k: usize,
    handle: &ModelHandle,
    store: &VectorStore,
    embedder: &dyn Embedder,
    settings: &RetrievalSettings,
) -> TranslationResult {
    let cfg = &handle.cfg;
    let fail = |status: TranslationStatus, msg: String| {
        let mut r = base_result(&query.id, cfg, None, k);
        r.status = status;
        r.diagnostic = Some(msg);
        r
    };
    let (prompt, top_score) = if k == 0 {
        match build_zero_shot(query) {
            Ok(p) => (p, None),
            Err(e) => return fail(TranslationStatus::InvalidResponse, e.to_string()),
        }
    } else {
        let embedding = match store.get(&query.id) {
            Some(r) => r.embedding.clone(),
            None => match embedder.embed(&query.fortran) {
                Ok(v) => v,
                Err(e) => return fail(TranslationStatus::InvalidResponse, format!("embedding query: {e}")),
            },
        };
        let q = RetrievalQuery::new(embedding, k, settings.metric, settings.order).excluding(query.id.clone());
        let examples = match store.query(&q) {
            Ok(x) => x,
            Err(e) => return fail(TranslationStatus::InvalidResponse, format!("retrieval: {e}")),
        };
        let top = examples.first().map(|e| e.score);
        match build_few_shot_ordered(query, &examples, cfg.prompt_budget(), settings.example_order) {
            Ok(p) => (p, top),
            Err(e @ PromptError::ContextOverflow { .. }) => {
                return fail(TranslationStatus::ContextOverflow, e.to_string())
            }
            Err(e) => return fail(TranslationStatus::InvalidResponse, e.to_string()),
        }
    };
    let mut result = match translate(&query.id, &prompt, cfg, handle.model.as_ref()) {
        Ok(r) => r,
        Err(e) => {
            let mut r = base_result(&query.id, cfg, Some(&prompt), k);
            r.status = TranslationStatus::InvalidResponse;
            r.diagnostic = Some(e.to_string());
            r
        }
    };
    result.requested_shots = k;
    result.top_score = top_score;
    result
}

pub fn read_results(path: &Path) -> Result<Vec<TranslationResult>, LlmError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let f = fs::File::open(path)?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => rows.push(r),
            // a torn final line from an interrupted run is dropped and redone
            Err(e) => log::warn!("{}:{}: skipping unreadable result row: {e}", path.display(), i + 1),
        }
    }
    Ok(rows)
}

pub fn write_results(path: &Path, rows: &[TranslationResult]) -> Result<(), LlmError> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r).expect("result serializes");
        buf.push(b'\n');
    }
    crate::util::write_atomic(path, &buf)?;
    Ok(())
}

/// Translates every (query, model, k) combination not already in `sink`.
///
/// Rows are appended to `sink` as they finish, so an interrupted batch
/// resumes where it stopped. On completion the file is rewritten in
/// canonical (query, model, k) order so identical runs give identical bytes.
pub fn translate_batch(
    queries: &[CodePair],
    store: &VectorStore,
    embedder: &dyn Embedder,
    models: &[ModelHandle],
    k_values: &[usize],
    settings: &RetrievalSettings,
    sink: &Path,
) -> Result<Vec<TranslationResult>, LlmError> {
    let existing = read_results(sink)?;
    let done: BTreeSet<(String, String, usize)> = existing.iter().map(TranslationResult::key).collect();
    // rewrite first so a torn trailing line cannot corrupt appends
    write_results(sink, &existing)?;

    let mut work = Vec::new();
    for q in queries {
        for (mi, m) in models.iter().enumerate() {
            for &k in k_values {
                if !done.contains(&(q.id.clone(), m.cfg.model_id.clone(), k)) {
                    work.push((q, mi, k));
                }
            }
        }
    }
    let writer = Mutex::new(fs::OpenOptions::new().append(true).open(sink)?);
    let threads = models.iter().map(|m| m.cfg.concurrency).max().unwrap_or(1).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    let fresh: Vec<Result<TranslationResult, LlmError>> = pool.install(|| {
        use rayon::prelude::*;
        work.par_iter()
            .map(|&(q, mi, k)| {
                let r = run_one(q, k, &models[mi], store, embedder, settings);
                let mut line = serde_json::to_vec(&r).expect("result serializes");
                line.push(b'\n');
                let mut w = writer.lock().expect("writer lock");
                w.write_all(&line)?;
                w.flush()?;
                Ok(r)
            })
            .collect()
    });
    let mut rows = existing;
    for r in fresh {
        rows.push(r?);
    }

    let q_pos: HashMap<&str, usize> = queries.iter().enumerate().map(|(i, q)| (q.id.as_str(), i)).collect();
    let m_pos: HashMap<&str, usize> = models
        .iter()
        .enumerate()
        .map(|(i, m)| (m.cfg.model_id.as_str(), i))
        .collect();
    let k_pos = |k: usize| k_values.iter().position(|&x| x == k).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| {
        (
            q_pos.get(r.query_id.as_str()).copied().unwrap_or(usize::MAX),
            m_pos.get(r.model_id.as_str()).copied().unwrap_or(usize::MAX),
            k_pos(r.requested_shots),
        )
    });
    write_results(sink, &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::build_few_shot;
    use crate::vectorstore::RetrievedExample;

    #[test]
    fn extract_examples() {
        assert_eq!(extract_code("Here you go:\n```cpp\nint a;\n```").unwrap(), "int a;");
        assert_eq!(extract_code("int a;").unwrap(), "int a;");
        assert!(matches!(extract_code("```\n\n```"), Err(LlmError::Extraction)));
        assert!(matches!(extract_code("  \n "), Err(LlmError::Extraction)));
    }

    #[test]
    fn extract_trims_prose_without_fence() {
        let raw = "Sure, here is the code:\nint main() {\n  return 0;\n}\nHope this helps!";
        assert_eq!(extract_code(raw).unwrap(), "int main() {\n  return 0;\n}");
        assert_eq!(extract_code("just words here").unwrap(), "just words here");
    }

    #[test]
    fn extract_takes_first_fence_and_unclosed_fence() {
        assert_eq!(extract_code("```\na;\n```\n```\nb;\n```").unwrap(), "a;");
        assert_eq!(extract_code("```cpp\nx = 1;\ny = 2;").unwrap(), "x = 1;\ny = 2;");
    }

    fn shot(id: &str, f: &str, c: &str, rank: usize) -> RetrievedExample {
        RetrievedExample {
            pair_id: id.into(),
            fortran: f.into(),
            cpp: c.into(),
            score: 0.5,
            rank,
        }
    }

    #[test]
    fn mock_echoes_final_shot() {
        let q = CodePair::new("q", "x = 1\n", "", "t");
        let p = build_few_shot(&q, &[shot("a", "y = 2\n", "int y = 2;\n", 1)], 10_000).unwrap();
        let r = translate("q", &p, &ModelConfig::mock("mock"), &MockModel).unwrap();
        assert_eq!(r.status, TranslationStatus::Ok);
        assert_eq!(r.candidate_cpp, "int y = 2;");

        let p2 = build_few_shot(&q, &[shot("a", "a", "AAA;", 1), shot("b", "b", "BBB;", 2)], 10_000).unwrap();
        assert_eq!(MockModel::echo(&p2.user), "BBB;");
    }

    #[test]
    fn mock_zero_shot_echoes_query() {
        let q = CodePair::new("q", "x = 1\n", "", "t");
        let p = build_zero_shot(&q).unwrap();
        assert_eq!(MockModel::echo(&p.user), "x = 1\n");
        assert_eq!(MockModel::echo("pre\n```\ncode();\n```\npost"), "code();");
    }

    struct CountingModel(std::sync::atomic::AtomicUsize);
    impl ChatModel for CountingModel {
        fn complete(&self, _: &Prompt, _: &ModelConfig) -> Result<Completion, LlmError> {
            self.0.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(Completion {
                text: "x;".into(),
                latency_ms: 1,
            })
        }
    }

    #[test]
    fn oversized_prompt_is_not_sent() {
        let q = CodePair::new("q", "a = a + 1\n".repeat(100), "", "t");
        let p = build_zero_shot(&q).unwrap();
        let mut cfg = ModelConfig::mock("m");
        cfg.context_tokens = p.est_tokens + 10;
        cfg.max_output_tokens = 11;
        let model = CountingModel(Default::default());
        let r = translate("q", &p, &cfg, &model).unwrap();
        assert_eq!(r.status, TranslationStatus::ContextOverflow);
        assert_eq!(model.0.load(std::sync::atomic::Ordering::SeqCst), 0);
    }

    #[test]
    fn request_bytes_are_deterministic() {
        let q = CodePair::new("q", "x = 1", "", "t");
        let p = build_zero_shot(&q).unwrap();
        let cfg = ModelConfig::http("gpt", "http://127.0.0.1:9/v1/chat/completions");
        let a = request_body(&p, &cfg);
        assert_eq!(a, request_body(&p, &cfg));
        let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
        assert_eq!(v["model"], "gpt");
        assert_eq!(v["temperature"], 0.0);
        assert_eq!(v["max_tokens"], 1024);
        assert_eq!(v["messages"][0]["role"], "system");
        assert_eq!(v["messages"][1]["content"], p.user);
    }

    #[test]
    fn config_validation() {
        let mut c = ModelConfig::mock("m");
        c.temperature = -0.1;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::mock("m");
        c.context_tokens = 0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::http("m", "http://x");
        c.endpoint = None;
        assert!(c.validate().is_err());
    }
}
