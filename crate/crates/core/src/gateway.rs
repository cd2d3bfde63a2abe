//! Chat-completion gateway.
//!
//! One trait, three backends:
//! - [`ScriptedBackend`] replays a recorded cassette, per caller role,
//!   in FIFO order; fully deterministic
//! - [`RemoteBackend`] speaks the common chat-completion HTTP shape
//!   with bearer auth, bounded retries, and shared rate limiting
//! - [`RecordingBackend`] wraps any backend and captures a cassette
//!
//! The gateway never interprets message content. Prompt construction
//! and reply parsing belong to the caller.

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

/// One prior exchange in the dialogue being continued. `speaker` is a
/// free label; "assistant" marks the model's own earlier replies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub speaker: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub turns: Vec<ChatTurn>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_id: String,
}

impl ChatRequest {
    pub fn is_empty(&self) -> bool {
        self.system_prompt.is_empty() && self.turns.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Complete,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenUsage {
    pub fn total(self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    pub fn accumulate(&mut self, other: TokenUsage) {
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts, first try included.
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, initial_backoff_ms: 1_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scripted,
    Remote,
}

/// Backend selection and connection settings. Decoding defaults here
/// are copied into each request by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Full chat-completion URL; required for remote.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credentials_env: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Shared request budget across all concurrent runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_minute: Option<u32>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Scripted,
            endpoint: None,
            model: "scripted".into(),
            credentials_env: None,
            retry: RetryPolicy::default(),
            temperature: 0.0,
            max_tokens: 1_024,
            requests_per_minute: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.kind == BackendKind::Remote && self.endpoint.is_none() {
            return Err(GatewayError::InvalidConfig(
                "remote backend requires an endpoint".into(),
            ));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidConfig("max_tokens must be > 0".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(GatewayError::InvalidConfig(
                "temperature must be a finite value >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("script underrun: no response left for {role} (consumed {consumed})")]
    ScriptUnderrun { role: String, consumed: usize },
    #[error("script divergence for {role} at its reply #{index}: request digest {got} does not match recorded {want}")]
    DigestMismatch {
        role: String,
        /// 1-based per-role reply number.
        index: usize,
        want: String,
        got: String,
    },
    #[error("credentials env var {0} is not set")]
    MissingCredentials(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("server returned status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed completion reply: {0}")]
    MalformedReply(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("cassette {file}: {message}")]
    Cassette { file: String, message: String },
}

/// Anything that can answer a chat request. `caller` is the role label
/// of the requesting agent, used by scripted backends to pick the
/// right reply queue and by recorders to tag entries.
#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(&self, caller: &str, request: &ChatRequest)
        -> Result<ChatResponse, GatewayError>;
}

#[async_trait]
impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    async fn complete(
        &self,
        caller: &str,
        request: &ChatRequest,
    ) -> Result<ChatResponse, GatewayError> {
        (**self).complete(caller, request).await
    }
}

/// Digest of the request content (system prompt and turns). Decoding
/// parameters are excluded so a cassette survives knob changes.
pub fn request_digest(request: &ChatRequest) -> String {
    #[derive(Serialize)]
    struct Content<'a> {
        system_prompt: &'a str,
        turns: &'a [ChatTurn],
    }
    let json = serde_json::to_vec(&Content {
        system_prompt: &request.system_prompt,
        turns: &request.turns,
    })
    .expect("digest serialization");
    hex::encode(Sha256::digest(&json))
}

/// Deterministic token estimate for scripted runs: about four
/// characters per token, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64 + 3) / 4
}

fn estimate_prompt_tokens(request: &ChatRequest) -> u64 {
    let mut total = estimate_tokens(&request.system_prompt);
    for turn in &request.turns {
        total += estimate_tokens(&turn.speaker) + estimate_tokens(&turn.text);
    }
    total
}

/// One recorded exchange. `request_digest` is optional so cassettes
/// can be written by hand; when present, replay verifies it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_digest: Option<String>,
    pub response_text: String,
}

/// An ordered list of recorded exchanges, serialized as JSON lines.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cassette {
    pub entries: Vec<CassetteEntry>,
}

impl Cassette {
    pub fn from_jsonl(text: &str, file: &str) -> Result<Cassette, GatewayError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: CassetteEntry =
                serde_json::from_str(line).map_err(|e| GatewayError::Cassette {
                    file: file.to_string(),
                    message: format!("line {}: {e}", i + 1),
                })?;
            entries.push(entry);
        }
        Ok(Cassette { entries })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("cassette serialization"));
            out.push('\n');
        }
        out
    }

    pub fn read_file(path: &Path) -> Result<Cassette, GatewayError> {
        let file = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::Cassette {
            file: file.clone(),
            message: e.to_string(),
        })?;
        Cassette::from_jsonl(&text, &file)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), GatewayError> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| GatewayError::Cassette {
            file: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

struct RoleQueue {
    pending: VecDeque<CassetteEntry>,
    consumed: usize,
}

/// Replays a cassette: each caller role gets its recorded replies in
/// order. Entries carrying a digest are checked against the live
/// request so silent divergence cannot happen.
pub struct ScriptedBackend {
    queues: Mutex<BTreeMap<String, RoleQueue>>,
}

impl ScriptedBackend {
    pub fn new(cassette: Cassette) -> Self {
        let mut queues: BTreeMap<String, RoleQueue> = BTreeMap::new();
        for entry in cassette.entries {
            queues
                .entry(entry.role.clone())
                .or_insert_with(|| RoleQueue { pending: VecDeque::new(), consumed: 0 })
                .pending
                .push_back(entry);
        }
        ScriptedBackend { queues: Mutex::new(queues) }
    }

    pub fn empty() -> Self {
        ScriptedBackend::new(Cassette::default())
    }

    /// Replies not yet consumed, across all roles.
    pub fn remaining(&self) -> usize {
        self.queues
            .lock()
            .expect("queues lock")
            .values()
            .map(|q| q.pending.len())
            .sum()
    }
}

#[async_trait]
impl ChatBackend for ScriptedBackend {
    async fn complete(
        &self,
        caller: &str,
        request: &ChatRequest,
    ) -> Result<ChatResponse, GatewayError> {
        let entry = {
            let mut queues = self.queues.lock().expect("queues lock");
            let queue = queues.get_mut(caller);
            match queue {
                Some(q) => match q.pending.pop_front() {
                    Some(entry) => {
                        q.consumed += 1;
                        (entry, q.consumed)
                    }
                    None => {
                        return Err(GatewayError::ScriptUnderrun {
                            role: caller.to_string(),
                            consumed: q.consumed,
                        })
                    }
                },
                None => {
                    return Err(GatewayError::ScriptUnderrun {
                        role: caller.to_string(),
                        consumed: 0,
                    })
                }
            }
        };
        let (entry, index) = entry;
        if let Some(want) = &entry.request_digest {
            let got = request_digest(request);
            if *want != got {
                return Err(GatewayError::DigestMismatch {
                    role: caller.to_string(),
                    index,
                    want: want.clone(),
                    got,
                });
            }
        }
        Ok(ChatResponse {
            usage: TokenUsage {
                prompt_tokens: estimate_prompt_tokens(request),
                completion_tokens: estimate_tokens(&entry.response_text),
            },
            finish_reason: FinishReason::Complete,
            text: entry.response_text,
        })
    }
}

/// Global request budget shared by all runs: a token bucket refilled
/// continuously at `requests_per_minute`.
pub struct RateLimiter {
    state: Mutex<BucketState>,
    per_minute: u32,
}

struct BucketState {
    tokens: f64,
    last_refill: std::time::Instant,
}

impl RateLimiter {
    pub fn new(per_minute: u32) -> Self {
        RateLimiter {
            state: Mutex::new(BucketState {
                tokens: per_minute.max(1) as f64,
                last_refill: std::time::Instant::now(),
            }),
            per_minute: per_minute.max(1),
        }
    }

    /// Waits until one request token is available, then takes it.
    pub async fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().expect("bucket lock");
                let now = std::time::Instant::now();
                let elapsed = now.duration_since(state.last_refill).as_secs_f64();
                let cap = self.per_minute as f64;
                state.tokens = (state.tokens + elapsed * cap / 60.0).min(cap);
                state.last_refill = now;
                if state.tokens >= 1.0 {
                    state.tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - state.tokens) * 60.0 / cap)
            };
            tokio::time::sleep(wait).await;
        }
    }
}

// Wire shapes for the common chat-completion HTTP protocol.
#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: String,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReplyMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireReplyMessage {
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

fn wire_messages(request: &ChatRequest) -> Vec<WireMessage<'_>> {
    let mut messages = Vec::new();
    if !request.system_prompt.is_empty() {
        messages.push(WireMessage { role: "system", content: request.system_prompt.clone() });
    }
    for turn in &request.turns {
        if turn.speaker == "assistant" {
            messages.push(WireMessage { role: "assistant", content: turn.text.clone() });
        } else if turn.speaker == "user" {
            messages.push(WireMessage { role: "user", content: turn.text.clone() });
        } else {
            // Third-party speakers are folded into user content with a
            // label so the transcript stays attributable.
            messages.push(WireMessage {
                role: "user",
                content: format!("{}: {}", turn.speaker, turn.text),
            });
        }
    }
    messages
}

/// HTTP client for any chat-completion-compatible server.
pub struct RemoteBackend {
    client: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    limiter: Option<std::sync::Arc<RateLimiter>>,
}

impl RemoteBackend {
    /// Reads credentials from the configured environment variable now,
    /// so a missing key fails at startup rather than mid-run.
    pub fn from_config(
        config: &BackendConfig,
        limiter: Option<std::sync::Arc<RateLimiter>>,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| GatewayError::InvalidConfig("remote backend requires an endpoint".into()))?;
        let api_key = match &config.credentials_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| GatewayError::MissingCredentials(var.clone()))?,
            ),
            None => None,
        };
        Ok(RemoteBackend {
            client: reqwest::Client::new(),
            endpoint,
            api_key,
            retry: config.retry,
            limiter,
        })
    }

    async fn attempt(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let body = WireRequest {
            model: &request.model_id,
            messages: wire_messages(request),
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let mut http = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            http = http.bearer_auth(key);
        }
        let response = http
            .send()
            .await
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .await
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(GatewayError::Http { status: status.as_u16(), body: text });
        }
        let wire: WireResponse = serde_json::from_str(&text)
            .map_err(|e| GatewayError::MalformedReply(e.to_string()))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| GatewayError::MalformedReply("empty choices".into()))?;
        let content = choice
            .message
            .content
            .ok_or_else(|| GatewayError::MalformedReply("missing message content".into()))?;
        let usage = wire.usage.unwrap_or_default();
        Ok(ChatResponse {
            text: content,
            finish_reason: match choice.finish_reason.as_deref() {
                Some("length") => FinishReason::Length,
                None | Some(_) => FinishReason::Complete,
            },
            usage: TokenUsage {
                prompt_tokens: usage.prompt_tokens,
                completion_tokens: usage.completion_tokens,
            },
        })
    }

    fn retryable(error: &GatewayError) -> bool {
        match error {
            GatewayError::Transport(_) => true,
            GatewayError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[async_trait]
impl ChatBackend for RemoteBackend {
    async fn complete(
        &self,
        _caller: &str,
        request: &ChatRequest,
    ) -> Result<ChatResponse, GatewayError> {
        let attempts = self.retry.max_attempts.max(1);
        let mut backoff = Duration::from_millis(self.retry.initial_backoff_ms);
        let mut last = String::new();
        for attempt in 1..=attempts {
            if let Some(limiter) = &self.limiter {
                limiter.acquire().await;
            }
            match self.attempt(request).await {
                Ok(response) => return Ok(response),
                Err(e) if Self::retryable(&e) && attempt < attempts => {
                    tracing::warn!(attempt, error = %e, "completion attempt failed, retrying");
                    last = e.to_string();
                    tokio::time::sleep(backoff).await;
                    backoff *= 2;
                }
                Err(e) if Self::retryable(&e) => {
                    return Err(GatewayError::RetriesExhausted {
                        attempts,
                        last: e.to_string(),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        Err(GatewayError::RetriesExhausted { attempts, last })
    }
}

/// Wraps a backend and captures every exchange as a cassette entry,
/// digests included, so a live run can be replayed exactly.
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<Vec<CassetteEntry>>,
}

impl<B> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend { inner, recorded: Mutex::new(Vec::new()) }
    }

    pub fn cassette(&self) -> Cassette {
        Cassette { entries: self.recorded.lock().expect("recorded lock").clone() }
    }
}

#[async_trait]
impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    async fn complete(
        &self,
        caller: &str,
        request: &ChatRequest,
    ) -> Result<ChatResponse, GatewayError> {
        let response = self.inner.complete(caller, request).await?;
        self.recorded.lock().expect("recorded lock").push(CassetteEntry {
            role: caller.to_string(),
            request_digest: Some(request_digest(request)),
            response_text: response.text.clone(),
        });
        Ok(response)
    }
}
