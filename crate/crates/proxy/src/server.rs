//! HTTP front end: `POST /v1/messages` and `GET /health`.

use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::sse::{Event, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use eventsource_stream::Eventsource;
use futures::channel::mpsc;
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use softverify::chat::{ChatChunk, ChatRequest, ChatResponse};
use thiserror::Error;
use tracing::{debug, info, warn};

use crate::messages::error_body;
use crate::paths::{PathPolicy, PathPolicyError};
use crate::stream::{SseEncoder, SseFrame, StreamBridge};
use crate::translate::{parse_request, ResultTemplates, TranslateError, Translator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    /// Base URL of the chat-completions server, e.g. `http://localhost:8000/v1`.
    pub upstream_url: String,
    pub model_id: String,
    /// Working directory the model saw during training. Required.
    pub canonical_root: String,
    /// Defaults to the process working directory.
    #[serde(default)]
    pub user_root: Option<String>,
    /// JSON file holding [`ResultTemplates`].
    #[serde(default)]
    pub templates_path: Option<PathBuf>,
    #[serde(default)]
    pub templates: ResultTemplates,
    #[serde(default)]
    pub drop_unknown_tools: bool,
    #[serde(default = "yes")]
    pub advertise_submit: bool,
    /// Name of the environment variable holding the upstream key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: u64,
    #[serde(default = "default_pool")]
    pub pool_max_idle_per_host: usize,
}

fn default_listen() -> String {
    "127.0.0.1:8082".into()
}
fn yes() -> bool {
    true
}
fn default_timeout() -> u64 {
    600
}
fn default_pool() -> usize {
    32
}

#[derive(Debug, Error)]
pub enum ProxyError {
    #[error("invalid proxy config: {0}")]
    Config(String),
    #[error(transparent)]
    Path(#[from] PathPolicyError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("http client: {0}")]
    Client(#[from] reqwest::Error),
}

impl ProxyConfig {
    pub fn new(upstream_url: &str, model_id: &str, canonical_root: &str) -> Self {
        Self {
            listen: default_listen(),
            upstream_url: upstream_url.into(),
            model_id: model_id.into(),
            canonical_root: canonical_root.into(),
            user_root: None,
            templates_path: None,
            templates: ResultTemplates::default(),
            drop_unknown_tools: false,
            advertise_submit: true,
            api_key_env: None,
            request_timeout_secs: default_timeout(),
            pool_max_idle_per_host: default_pool(),
        }
    }

    pub fn translator(&self) -> Result<Translator, ProxyError> {
        if self.upstream_url.trim().is_empty() {
            return Err(ProxyError::Config("upstream_url is empty".into()));
        }
        if self.model_id.trim().is_empty() {
            return Err(ProxyError::Config("model_id is empty".into()));
        }
        let user_root = match &self.user_root {
            Some(r) => r.clone(),
            None => std::env::current_dir()?.display().to_string(),
        };
        let templates = match &self.templates_path {
            Some(p) => {
                let raw = std::fs::read_to_string(p)?;
                serde_json::from_str(&raw)
                    .map_err(|e| ProxyError::Config(format!("templates file {}: {e}", p.display())))?
            }
            None => self.templates.clone(),
        };
        Ok(Translator {
            policy: PathPolicy::new(&self.canonical_root, &user_root)?,
            templates,
            model_id: self.model_id.clone(),
            drop_unknown_tools: self.drop_unknown_tools,
            advertise_submit: self.advertise_submit,
        })
    }
}

struct AppState {
    translator: Translator,
    client: reqwest::Client,
    completions_url: String,
    models_url: String,
    api_key: Option<String>,
}

/// Builds the router. Useful for embedding and for tests.
pub fn router(config: &ProxyConfig) -> Result<Router, ProxyError> {
    let translator = config.translator()?;
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs(config.request_timeout_secs))
        .pool_max_idle_per_host(config.pool_max_idle_per_host)
        .build()?;
    let base = config.upstream_url.trim_end_matches('/');
    let api_key = config.api_key_env.as_deref().and_then(|v| std::env::var(v).ok());
    let state = Arc::new(AppState {
        translator,
        client,
        completions_url: format!("{base}/chat/completions"),
        models_url: format!("{base}/models"),
        api_key,
    });
    Ok(Router::new()
        .route("/v1/messages", post(messages))
        .route("/health", get(health))
        .with_state(state))
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve<F>(config: &ProxyConfig, shutdown: F) -> Result<(), ProxyError>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    let app = router(config)?;
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    info!(addr = %listener.local_addr()?, upstream = %config.upstream_url, "proxy listening");
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

fn error_response(status: StatusCode, kind: &str, message: &str) -> Response {
    (status, Json(error_body(kind, message))).into_response()
}

impl IntoResponse for TranslateError {
    fn into_response(self) -> Response {
        error_response(StatusCode::BAD_REQUEST, self.kind(), &self.to_string())
    }
}

impl AppState {
    fn upstream(&self, req: &ChatRequest) -> reqwest::RequestBuilder {
        let b = self.client.post(&self.completions_url).json(req);
        match &self.api_key {
            Some(k) => b.bearer_auth(k),
            None => b,
        }
    }
}

async fn messages(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let inbound = match parse_request(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    let outbound = match state.translator.translate_request(&inbound) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    debug!(messages = outbound.messages.len(), stream = inbound.stream, "forwarding");
    let resp = match state.upstream(&outbound).send().await {
        Ok(r) => r,
        Err(e) => return error_response(StatusCode::BAD_GATEWAY, "api_error", &format!("upstream unreachable: {e}")),
    };
    if !resp.status().is_success() {
        let code = resp.status();
        let text = resp.text().await.unwrap_or_default();
        warn!(%code, "upstream error");
        let status = if code.is_client_error() { StatusCode::BAD_REQUEST } else { StatusCode::BAD_GATEWAY };
        return error_response(status, "api_error", &format!("upstream returned {code}: {text}"));
    }
    if inbound.stream {
        stream_response(state, resp, inbound.model)
    } else {
        match resp.json::<ChatResponse>().await {
            Ok(r) => Json(state.translator.translate_response(&r, &inbound.model)).into_response(),
            Err(e) => error_response(StatusCode::BAD_GATEWAY, "api_error", &format!("bad upstream reply: {e}")),
        }
    }
}

fn stream_response(state: Arc<AppState>, resp: reqwest::Response, client_model: String) -> Response {
    let (mut tx, rx) = mpsc::channel::<SseFrame>(64);
    tokio::spawn(async move {
        let mut upstream = resp.bytes_stream().eventsource();
        let mut bridge = StreamBridge::new(&state.translator);
        let mut encoder: Option<SseEncoder> = None;
        let mut frames = Vec::new();
        loop {
            let events = match upstream.next().await {
                None => bridge.finish(),
                Some(Err(e)) => bridge.fail(&format!("upstream stream failed: {e}")),
                Some(Ok(ev)) if ev.data.trim() == "[DONE]" => bridge.finish(),
                Some(Ok(ev)) => match serde_json::from_str::<ChatChunk>(&ev.data) {
                    Ok(chunk) => {
                        if encoder.is_none() {
                            let enc = SseEncoder::new(&chunk.id, &client_model);
                            frames.push(enc.start());
                            encoder = Some(enc);
                        }
                        bridge.push(&chunk)
                    }
                    Err(e) => bridge.fail(&format!("bad upstream chunk: {e}")),
                },
            };
            let enc = encoder.get_or_insert_with(|| {
                let enc = SseEncoder::new("", &client_model);
                frames.push(enc.start());
                enc
            });
            let terminal = events.iter().any(|e| {
                matches!(e, crate::stream::BridgeEvent::Finish { .. } | crate::stream::BridgeEvent::Error(_))
            });
            for e in &events {
                frames.extend(enc.encode(e));
            }
            for f in frames.drain(..) {
                if tx.send(f).await.is_err() {
                    debug!("client went away; dropping upstream stream");
                    return;
                }
            }
            if terminal {
                return;
            }
        }
    });
    let events = rx.map(|f| Ok::<_, Infallible>(Event::default().event(f.event).data(f.data.to_string())));
    Sse::new(events).into_response()
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    let probe = state.client.get(&state.models_url).timeout(Duration::from_secs(5));
    let probe = match &state.api_key {
        Some(k) => probe.bearer_auth(k),
        None => probe,
    };
    let reachable = probe.send().await.is_ok_and(|r| r.status().is_success());
    let status = if reachable { StatusCode::OK } else { StatusCode::SERVICE_UNAVAILABLE };
    let body = serde_json::json!({
        "status": if reachable { "ok" } else { "degraded" },
        "upstream": if reachable { "reachable" } else { "unreachable" },
    });
    (status, Json(body)).into_response()
}
