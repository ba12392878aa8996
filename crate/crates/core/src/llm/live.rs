use super::{Backend, BackendKind, ChatRequest, LlmError, Message, ModelResponse, Usage};
use base64::Engine;
use serde_json::{json, Value};
use std::time::{Duration, Instant};

pub const API_KEY_ENV: &str = "SENSORPEN_API_KEY";

/// Client for `POST <base>/v1/chat/completions`.
pub struct LiveClient {
    base: String,
    key: String,
    http: reqwest::blocking::Client,
}

impl LiveClient {
    pub fn new(base: impl Into<String>, key: impl Into<String>, timeout: Duration) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(LiveClient { base: base.into().trim_end_matches('/').to_string(), key: key.into(), http })
    }

    /// Reads the key from `SENSORPEN_API_KEY`.
    pub fn from_env(base: impl Into<String>, timeout: Duration) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| LlmError::MissingKey(API_KEY_ENV))?;
        Self::new(base, key, timeout)
    }

    pub fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.base)
    }
}

fn content(m: &Message) -> Value {
    if m.images.is_empty() {
        return Value::String(m.text.clone());
    }
    let mut parts = vec![json!({"type": "text", "text": m.text})];
    for img in &m.images {
        let url = format!("data:image/png;base64,{}", base64::engine::general_purpose::STANDARD.encode(img));
        parts.push(json!({"type": "image_url", "image_url": {"url": url}}));
    }
    Value::Array(parts)
}

/// The JSON body sent for `request`. Unset options are left out.
pub fn request_body(request: &ChatRequest) -> Value {
    let messages: Vec<Value> = request.messages.iter().map(|m| json!({"role": m.role, "content": content(m)})).collect();
    let mut body = json!({"model": request.model_id, "messages": messages});
    if let Some(t) = request.temperature {
        body["temperature"] = json!(t);
    }
    if let Some(n) = request.max_tokens {
        body["max_tokens"] = json!(n);
    }
    body
}

fn parse_completion(body: &Value) -> Result<(String, Option<Usage>), LlmError> {
    let text = match &body["choices"][0]["message"]["content"] {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => return Err(LlmError::Malformed(format!("content is {other}"))),
    };
    if body["choices"].as_array().map_or(true, Vec::is_empty) {
        return Err(LlmError::Malformed("no choices".into()));
    }
    let usage = match (body["usage"]["prompt_tokens"].as_u64(), body["usage"]["completion_tokens"].as_u64()) {
        (Some(p), Some(c)) => Some(Usage { prompt_tokens: p, completion_tokens: c }),
        _ => None,
    };
    Ok((text, usage))
}

impl Backend for LiveClient {
    fn complete(&self, request: &ChatRequest) -> Result<ModelResponse, LlmError> {
        let started = Instant::now();
        let resp = self
            .http
            .post(self.endpoint())
            .bearer_auth(&self.key)
            .json(&request_body(request))
            .send()
            .map_err(|e| if e.is_timeout() { LlmError::Timeout } else { LlmError::Transport(e.to_string()) })?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| if e.is_timeout() { LlmError::Timeout } else { LlmError::Transport(e.to_string()) })?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(LlmError::AuthFailed),
            429 => return Err(LlmError::RateLimited),
            408 | 504 => return Err(LlmError::Timeout),
            _ => return Err(LlmError::Http { status, body: text }),
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| LlmError::Malformed(e.to_string()))?;
        let (text, usage) = parse_completion(&body)?;
        Ok(ModelResponse {
            text,
            usage,
            latency_ms: started.elapsed().as_millis() as u64,
            backend_kind: BackendKind::Live,
        })
    }
}
