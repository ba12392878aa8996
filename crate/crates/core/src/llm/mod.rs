//! Completion backends: an OpenAI-compatible HTTP client and a
//! fingerprint-keyed record/replay store, plus a bounded-parallel batch
//! runner with retry.

mod batch;
mod live;
mod replay;

pub use batch::{complete_with_retry, run_batch, Clock, MockClock, RetryPolicy, SystemClock};
pub use live::{LiveClient, API_KEY_ENV};
pub use replay::{RecordBackend, ReplayBackend, ReplayStore, StoredResponse};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("rate limited")]
    RateLimited,
    #[error("authentication failed")]
    AuthFailed,
    #[error("request timed out")]
    Timeout,
    #[error("no recorded response for fingerprint {0}")]
    ReplayMiss(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("{0} is not set")]
    MissingKey(&'static str),
    #[error("parallelism must be at least 1")]
    BadParallelism,
    #[error("replay store {path}: {message}")]
    Store { path: PathBuf, message: String },
}

impl LlmError {
    /// Errors worth another attempt.
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::RateLimited | LlmError::Timeout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub role: Role,
    pub text: String,
    /// PNG images, in presentation order.
    pub images: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<Message>,
    /// `None` leaves the provider default in place.
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    /// The whole prompt as a single user message.
    pub fn user(model_id: impl Into<String>, text: impl Into<String>, images: Vec<Vec<u8>>) -> Self {
        ChatRequest {
            model_id: model_id.into(),
            messages: vec![Message { role: Role::User, text: text.into(), images }],
            temperature: None,
            max_tokens: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Record,
    Replay,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub usage: Option<Usage>,
    pub latency_ms: u64,
    pub backend_kind: BackendKind,
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ModelResponse, LlmError>;
}

impl<F> Backend for F
where
    F: Fn(&ChatRequest) -> Result<ModelResponse, LlmError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<ModelResponse, LlmError> {
        self(request)
    }
}

#[derive(Serialize)]
struct CanonicalMessage {
    role: Role,
    text: String,
    images: Vec<String>,
}

#[derive(Serialize)]
struct Canonical<'a> {
    model: &'a str,
    messages: Vec<CanonicalMessage>,
    temperature: Option<f64>,
    max_tokens: Option<u32>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the canonical JSON form. Message order is kept, line endings
/// become `\n` and images enter as their own digests.
pub fn fingerprint(request: &ChatRequest) -> String {
    let canonical = Canonical {
        model: &request.model_id,
        messages: request
            .messages
            .iter()
            .map(|m| CanonicalMessage {
                role: m.role,
                text: m.text.replace("\r\n", "\n").replace('\r', "\n"),
                images: m.images.iter().map(|i| sha256_hex(i)).collect(),
            })
            .collect(),
        temperature: request.temperature,
        max_tokens: request.max_tokens,
    };
    let json = serde_json::to_vec(&canonical).expect("canonical request serializes");
    sha256_hex(&json)
}
