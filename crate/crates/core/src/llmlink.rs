//! Chat-completion access behind one client, with live, record, replay
//! and scripted backends.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const API_KEY_ENV: &str = "CTF_LLM_API_KEY";
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_RANK_MODEL: &str = "gpt-4";
pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("ReplayMiss: no recorded response for request {0}")]
    ReplayMiss(String),
    #[error("transport error (status {status}): {body}")]
    TransportError { status: u16, body: String },
    #[error("credentials missing: set {API_KEY_ENV}")]
    CredentialsMissing,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transcript error: {0}")]
    Transcript(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

/// Field order is fixed (alphabetical) so the serialized form is stable.
#[derive(Serialize)]
struct CanonicalMessage<'a> {
    content: &'a str,
    role: Role,
}

#[derive(Serialize)]
struct CanonicalRequest<'a> {
    max_tokens: u32,
    messages: Vec<CanonicalMessage<'a>>,
    model: &'a str,
    temperature: f64,
}

impl ChatRequest {
    pub fn new(model: &str, messages: Vec<ChatMessage>) -> Self {
        Self {
            model: model.to_string(),
            messages,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest(format!("temperature {}", self.temperature)));
        }
        Ok(())
    }

    pub fn canonical_json(&self) -> String {
        let c = CanonicalRequest {
            max_tokens: self.max_tokens,
            messages: self
                .messages
                .iter()
                .map(|m| CanonicalMessage { content: &m.content, role: m.role })
                .collect(),
            model: &self.model,
            temperature: self.temperature,
        };
        serde_json::to_string(&c).expect("request serializes")
    }

    /// Hex SHA-256 of the canonical form.
    pub fn key(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Content of the final user message.
    pub fn last_user(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: String,
    #[serde(default)]
    pub usage: Usage,
}

/// Rough token estimate for backends that do not report usage.
fn estimate_tokens(s: &str) -> u64 {
    s.len().div_ceil(4) as u64
}

impl ChatResponse {
    pub fn synthetic(request: &ChatRequest, content: String) -> Self {
        let prompt: u64 = request.messages.iter().map(|m| estimate_tokens(&m.content)).sum();
        let usage = Usage {
            prompt_tokens: prompt,
            completion_tokens: estimate_tokens(&content),
        };
        Self {
            content,
            finish_reason: "stop".into(),
            usage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub key: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub tag: String,
    pub request: ChatRequest,
    pub response: ChatResponse,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
    fn describe(&self) -> String;
}

/// OpenAI-compatible HTTP endpoint.
pub struct LiveBackend {
    base_url: String,
    api_key: String,
    agent: ureq::Agent,
    retries: u32,
    backoff: Duration,
}

impl LiveBackend {
    pub fn new(base_url: &str, api_key: &str) -> Result<Self, LlmError> {
        if api_key.trim().is_empty() {
            return Err(LlmError::CredentialsMissing);
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            agent,
            retries: 3,
            backoff: Duration::from_millis(500),
        })
    }

    /// Reads the key from `CTF_LLM_API_KEY`.
    pub fn from_env(base_url: &str) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| LlmError::CredentialsMissing)?;
        Self::new(base_url, &key)
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let url = format!("{}/v1/chat/completions", self.base_url);
        let body = serde_json::json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| LlmError::TransportError { status: 0, body: e.to_string() })?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::TransportError { status, body: e.to_string() })?;
        if !(200..300).contains(&status) {
            return Err(LlmError::TransportError { status, body: text });
        }
        let parsed: WireResponse = serde_json::from_str(&text)
            .map_err(|e| LlmError::TransportError { status, body: format!("unreadable response ({e}): {text}") })?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| LlmError::TransportError { status, body: "response has no choices".into() })?;
        Ok(ChatResponse {
            content: choice.message.content.unwrap_or_default(),
            finish_reason: choice.finish_reason.unwrap_or_else(|| "stop".into()),
            usage: parsed.usage.unwrap_or_default(),
        })
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

fn retryable(e: &LlmError) -> bool {
    matches!(e, LlmError::TransportError { status, .. } if *status == 0 || *status == 429 || *status >= 500)
}

impl ChatBackend for LiveBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(request) {
                Err(e) if retryable(&e) && attempt < self.retries => {
                    log::warn!("chat request failed ({e}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn describe(&self) -> String {
        format!("live:{}", self.base_url)
    }
}

/// Forwards to an inner backend and appends every exchange to a JSONL file.
pub struct RecordBackend {
    inner: Box<dyn ChatBackend>,
    path: PathBuf,
    sink: Mutex<File>,
}

impl RecordBackend {
    pub fn new(inner: Box<dyn ChatBackend>, path: &Path) -> Result<Self, LlmError> {
        let sink = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| LlmError::Transcript(format!("{}: {e}", path.display())))?;
        Ok(Self {
            inner,
            path: path.to_path_buf(),
            sink: Mutex::new(sink),
        })
    }
}

impl ChatBackend for RecordBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let response = self.inner.complete(request)?;
        let entry = TranscriptEntry {
            key: request.key(),
            tag: String::new(),
            request: request.clone(),
            response: response.clone(),
        };
        let line = serde_json::to_string(&entry).expect("entry serializes");
        let mut sink = self.sink.lock().expect("sink lock");
        writeln!(sink, "{line}").map_err(|e| LlmError::Transcript(e.to_string()))?;
        Ok(response)
    }

    fn describe(&self) -> String {
        format!("record:{} ({})", self.path.display(), self.inner.describe())
    }
}

/// Serves stored responses by request key; never touches the network.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    responses: HashMap<String, ChatResponse>,
    source: String,
}

impl ReplayBackend {
    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Result<Self, LlmError> {
        let mut responses: HashMap<String, ChatResponse> = HashMap::new();
        for (i, e) in entries.into_iter().enumerate() {
            let key = e.request.key();
            if key != e.key {
                return Err(LlmError::Transcript(format!(
                    "entry {}: stored key {} does not match its request ({key})",
                    i + 1,
                    e.key
                )));
            }
            match responses.get(&key) {
                Some(existing) if *existing != e.response => {
                    return Err(LlmError::Transcript(format!("entry {}: conflicting responses for key {key}", i + 1)));
                }
                Some(_) => {}
                None => {
                    responses.insert(key, e.response);
                }
            }
        }
        Ok(Self {
            responses,
            source: "memory".into(),
        })
    }

    pub fn from_jsonl(path: &Path) -> Result<Self, LlmError> {
        let file = File::open(path).map_err(|e| LlmError::Transcript(format!("{}: {e}", path.display())))?;
        let entries = read_transcript(BufReader::new(file))?;
        let mut backend = Self::from_entries(entries)?;
        backend.source = path.display().to_string();
        Ok(backend)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let key = request.key();
        self.responses.get(&key).cloned().ok_or(LlmError::ReplayMiss(key))
    }

    fn describe(&self) -> String {
        format!("replay:{}", self.source)
    }
}

pub fn read_transcript(reader: impl BufRead) -> Result<Vec<TranscriptEntry>, LlmError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| LlmError::Transcript(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: TranscriptEntry =
            serde_json::from_str(&line).map_err(|e| LlmError::Transcript(format!("line {}: {e}", i + 1)))?;
        out.push(entry);
    }
    Ok(out)
}

pub fn write_transcript(entries: &[TranscriptEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("entry serializes"));
        out.push('\n');
    }
    out
}

/// Produces a response for a request without any model.
pub trait Rulebook: Send + Sync {
    fn respond(&self, request: &ChatRequest) -> String;
}

pub struct ScriptedBackend {
    rulebook: Box<dyn Rulebook>,
}

impl ScriptedBackend {
    pub fn new(rulebook: Box<dyn Rulebook>) -> Self {
        Self { rulebook }
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let content = self.rulebook.respond(request);
        Ok(ChatResponse::synthetic(request, content))
    }

    fn describe(&self) -> String {
        "scripted".into()
    }
}

/// Entry point used by the agents: counts calls and tokens and keeps a
/// tagged log of every exchange.
pub struct LlmClient {
    backend: Box<dyn ChatBackend>,
    calls: AtomicU64,
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
    log: Mutex<Vec<TranscriptEntry>>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl LlmClient {
    pub fn new(backend: Box<dyn ChatBackend>) -> Self {
        Self {
            backend,
            calls: AtomicU64::new(0),
            prompt_tokens: AtomicU64::new(0),
            completion_tokens: AtomicU64::new(0),
            log: Mutex::new(Vec::new()),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn scripted(rulebook: impl Rulebook + 'static) -> Self {
        Self::new(Box::new(ScriptedBackend::new(Box::new(rulebook))))
    }

    pub fn describe(&self) -> String {
        self.backend.describe()
    }

    /// Builds a request with the client's sampling settings.
    pub fn request(&self, model: &str, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            model: model.to_string(),
            messages,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }

    pub fn complete(&self, tag: &str, request: ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let response = self.backend.complete(&request)?;
        self.prompt_tokens.fetch_add(response.usage.prompt_tokens, Ordering::SeqCst);
        self.completion_tokens.fetch_add(response.usage.completion_tokens, Ordering::SeqCst);
        self.log.lock().expect("log lock").push(TranscriptEntry {
            key: request.key(),
            tag: tag.to_string(),
            request,
            response: response.clone(),
        });
        Ok(response)
    }

    /// Single user-message call returning the content.
    pub fn ask(&self, tag: &str, model: &str, prompt: &str) -> Result<String, LlmError> {
        let req = self.request(model, vec![ChatMessage::user(prompt)]);
        self.complete(tag, req).map(|r| r.content)
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn usage(&self) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens.load(Ordering::SeqCst),
            completion_tokens: self.completion_tokens.load(Ordering::SeqCst),
        }
    }

    /// Logged exchanges ordered by tag, so concurrent calls persist
    /// deterministically.
    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        let mut entries = self.log.lock().expect("log lock").clone();
        entries.sort_by(|a, b| a.tag.cmp(&b.tag).then_with(|| a.key.cmp(&b.key)));
        entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo;
    impl Rulebook for Echo {
        fn respond(&self, request: &ChatRequest) -> String {
            format!("echo: {}", request.last_user())
        }
    }

    #[test]
    fn key_is_stable_and_discriminating() {
        let a = ChatRequest::new("m", vec![ChatMessage::user("hello  world\n")]);
        let b = a.clone();
        assert_eq!(a.key(), b.key());
        assert_eq!(a.key().len(), 64);
        let mut c = a.clone();
        c.max_tokens += 1;
        assert_ne!(a.key(), c.key());
        let mut d = a.clone();
        d.messages[0].content = "hello world\n".into();
        assert_ne!(a.key(), d.key());
        assert_eq!(
            a.canonical_json(),
            r#"{"max_tokens":2048,"messages":[{"content":"hello  world\n","role":"user"}],"model":"m","temperature":0.0}"#
        );
    }

    #[test]
    fn replay_round_trip_and_miss() {
        let client = LlmClient::scripted(Echo);
        client.ask("b", "m", "two").unwrap();
        client.ask("a", "m", "one").unwrap();
        assert_eq!(client.calls(), 2);
        let transcript = client.transcript();
        assert_eq!(transcript[0].tag, "a");
        let text = write_transcript(&transcript);
        let replay = ReplayBackend::from_entries(read_transcript(text.as_bytes()).unwrap()).unwrap();
        let replayed = LlmClient::new(Box::new(replay));
        assert_eq!(replayed.ask("x", "m", "one").unwrap(), "echo: one");
        assert!(matches!(replayed.ask("x", "m", "three"), Err(LlmError::ReplayMiss(_))));
        assert_eq!(replayed.calls(), 2);
    }

    #[test]
    fn replay_rejects_tampering() {
        let client = LlmClient::scripted(Echo);
        client.ask("a", "m", "one").unwrap();
        let mut entries = client.transcript();
        let mut dup = entries[0].clone();
        dup.response.content = "other".into();
        entries.push(dup);
        assert!(matches!(ReplayBackend::from_entries(entries.clone()), Err(LlmError::Transcript(_))));
        entries.pop();
        entries[0].request.model = "n".into();
        assert!(matches!(ReplayBackend::from_entries(entries), Err(LlmError::Transcript(_))));
    }

    #[test]
    fn invalid_requests() {
        let client = LlmClient::scripted(Echo);
        let req = ChatRequest::new("m", vec![]);
        assert!(matches!(client.complete("t", req), Err(LlmError::InvalidRequest(_))));
        assert!(matches!(LiveBackend::new("http://x", " "), Err(LlmError::CredentialsMissing)));
    }
}
