//! Chat-completions transport.

use std::collections::BTreeMap;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::{ChatRequest, ChatResponse};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EndpointError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {code}: {body}")]
    Status { code: u16, body: String },
    /// The request no longer fits the model's context window.
    #[error("context window exceeded: {0}")]
    ContextOverflow(String),
    #[error("undecodable response: {0}")]
    Decode(String),
}

impl EndpointError {
    fn retryable(&self) -> bool {
        match self {
            EndpointError::Transport(_) => true,
            EndpointError::Status { code, .. } => *code == 429 || *code >= 500,
            EndpointError::ContextOverflow(_) | EndpointError::Decode(_) => false,
        }
    }
}

pub trait ChatEndpoint: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, EndpointError>;
}

impl<T: ChatEndpoint + ?Sized> ChatEndpoint for &T {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, EndpointError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Base delay; doubles after each failed attempt.
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            backoff_ms: 500,
        }
    }
}

fn default_max_steps() -> usize {
    115
}

fn default_timeout() -> u64 {
    600
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_id: String,
    /// Cap on assistant turns per rollout.
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Name of the environment variable holding a bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub headers: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_id: model_id.into(),
            max_steps: default_max_steps(),
            request_timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
            api_key_env: None,
            headers: BTreeMap::new(),
            temperature: None,
            max_tokens: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_steps == 0 {
            return Err("max_steps must be at least 1".into());
        }
        if self.retry.attempts == 0 {
            return Err("retry.attempts must be at least 1".into());
        }
        if self.model_id.is_empty() {
            return Err("model_id is empty".into());
        }
        Ok(())
    }
}

const OVERFLOW_MARKERS: &[&str] = &[
    "context_length_exceeded",
    "maximum context length",
    "context length",
    "context window",
    "too many tokens",
];

fn looks_like_overflow(body: &str) -> bool {
    let lower = body.to_ascii_lowercase();
    OVERFLOW_MARKERS.iter().any(|m| lower.contains(m))
}

/// Blocking HTTP client for `POST {base_url}/chat/completions`.
pub struct HttpEndpoint {
    client: reqwest::blocking::Client,
    config: EndpointConfig,
    api_key: Option<String>,
}

impl HttpEndpoint {
    pub fn new(config: EndpointConfig) -> Result<Self, EndpointError> {
        config.validate().map_err(EndpointError::Transport)?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.request_timeout_secs))
            .build()
            .map_err(|e| EndpointError::Transport(e.to_string()))?;
        let api_key = config
            .api_key_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok())
            .filter(|k| !k.is_empty());
        Ok(Self {
            client,
            config,
            api_key,
        })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, request: &ChatRequest) -> Result<ChatResponse, EndpointError> {
        let mut req = self.client.post(self.url()).json(request);
        for (k, v) in &self.config.headers {
            req = req.header(k, v);
        }
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| EndpointError::Transport(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| EndpointError::Transport(e.to_string()))?;
        if !status.is_success() {
            if status.as_u16() == 400 || status.as_u16() == 413 {
                if looks_like_overflow(&body) {
                    return Err(EndpointError::ContextOverflow(body));
                }
            }
            return Err(EndpointError::Status {
                code: status.as_u16(),
                body,
            });
        }
        serde_json::from_str(&body).map_err(|e| EndpointError::Decode(e.to_string()))
    }
}

impl ChatEndpoint for HttpEndpoint {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, EndpointError> {
        let mut delay = self.config.retry.backoff_ms;
        let mut last = None;
        for attempt in 1..=self.config.retry.attempts {
            match self.attempt(request) {
                Ok(r) => return Ok(r),
                Err(e) if e.retryable() && attempt < self.config.retry.attempts => {
                    tracing::warn!(attempt, error = %e, "chat request failed; retrying");
                    thread::sleep(Duration::from_millis(delay));
                    delay = delay.saturating_mul(2);
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap_or_else(|| EndpointError::Transport("no attempts made".into())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chat::ChatMessage;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves the given (status, body) replies in order, one per connection.
    fn serve(replies: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = thread::spawn(move || {
            let mut seen = Vec::new();
            for (code, body) in replies {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                let mut head = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    head.push_str(&line);
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                seen.push(format!("{head}\n{}", String::from_utf8_lossy(&buf)));
                let reply = format!(
                    "HTTP/1.1 {code} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
            seen
        });
        (format!("http://{addr}/v1"), handle)
    }

    fn request() -> ChatRequest {
        ChatRequest {
            model: "teacher".into(),
            messages: vec![ChatMessage::user("hi")],
            ..ChatRequest::default()
        }
    }

    fn config(base: String) -> EndpointConfig {
        EndpointConfig {
            retry: RetryPolicy {
                attempts: 3,
                backoff_ms: 1,
            },
            headers: BTreeMap::from([("x-run".to_string(), "abc".to_string())]),
            ..EndpointConfig::new(base, "teacher")
        }
    }

    const OK: &str = r#"{"id":"1","model":"teacher","choices":[{"index":0,"message":{"role":"assistant","content":"hello"},"finish_reason":"stop"}]}"#;

    #[test]
    fn retries_server_errors_then_succeeds() {
        let (base, h) = serve(vec![(503, "busy".into()), (200, OK.into())]);
        let ep = HttpEndpoint::new(config(base)).unwrap();
        let r = ep.complete(&request()).unwrap();
        assert_eq!(r.first_message().unwrap().content.as_deref(), Some("hello"));
        let seen = h.join().unwrap();
        assert_eq!(seen.len(), 2);
        assert!(seen[0].starts_with("POST /v1/chat/completions"));
        assert!(seen[0].contains("x-run: abc"));
        assert!(seen[0].contains("\"model\":\"teacher\""));
    }

    #[test]
    fn context_overflow_is_not_retried() {
        let body = r#"{"error":{"code":"context_length_exceeded","message":"too long"}}"#;
        let (base, h) = serve(vec![(400, body.into())]);
        let ep = HttpEndpoint::new(config(base)).unwrap();
        assert!(matches!(ep.complete(&request()), Err(EndpointError::ContextOverflow(_))));
        assert_eq!(h.join().unwrap().len(), 1);
    }

    #[test]
    fn client_errors_fail_fast() {
        let (base, h) = serve(vec![(401, "nope".into())]);
        let ep = HttpEndpoint::new(config(base)).unwrap();
        assert_eq!(
            ep.complete(&request()),
            Err(EndpointError::Status {
                code: 401,
                body: "nope".into()
            })
        );
        h.join().unwrap();
    }

    #[test]
    fn config_defaults_and_validation() {
        let c: EndpointConfig = serde_json::from_str(r#"{"base_url":"http://x","model_id":"m"}"#).unwrap();
        assert_eq!(c.max_steps, 115);
        assert_eq!(c.retry.attempts, 3);
        assert!(EndpointConfig { max_steps: 0, ..c.clone() }.validate().is_err());
        assert!(c.validate().is_ok());
    }
}
