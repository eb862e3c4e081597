//! Starts a stand-in chat-completions server and the proxy in front of it,
//! then sends one Messages request the way an agent client would.
//!
//!     cargo run -p softverify-proxy --example local_round_trip

use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use softverify::chat::{ChatMessage, ChatRequest, ChatResponse, ChatToolCall};
use softverify_proxy::{router, ProxyConfig};

async fn spawn(app: Router) -> std::net::SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

/// Pretends to be a model trained in /testbed: it always asks to view a file.
async fn completions(Json(req): Json<ChatRequest>) -> Json<ChatResponse> {
    let tools: Vec<&str> = req.tools.iter().map(|t| t.function.name.as_str()).collect();
    println!("upstream saw model {:?}, tools {tools:?}", req.model);
    let mut m = ChatMessage::text("assistant", "Looking at /testbed/src/app.py first.");
    m.tool_calls.push(ChatToolCall::new(
        "call_1",
        "str_replace_editor",
        json!({"command": "view", "path": "/testbed/src/app.py", "view_range": [1, 40]}).to_string(),
    ));
    Json(ChatResponse::from_message(m, "tool_calls"))
}

#[tokio::main]
async fn main() {
    let upstream = Router::new()
        .route("/v1/chat/completions", post(completions))
        .route("/v1/models", get(|| async { Json(json!({"data": []})) }));
    let up = spawn(upstream).await;

    let mut cfg = ProxyConfig::new(&format!("http://{up}/v1"), "sera-32b", "/testbed");
    cfg.user_root = Some("/home/me/app".into());
    let proxy = spawn(router(&cfg).expect("valid config")).await;

    let client = reqwest::Client::new();
    let health = client.get(format!("http://{proxy}/health")).send().await.unwrap();
    println!("health: {}", health.status());

    let reply: serde_json::Value = client
        .post(format!("http://{proxy}/v1/messages"))
        .json(&json!({
            "model": "whatever-the-client-calls-it",
            "max_tokens": 1024,
            "tools": [
                {"name": "Read", "input_schema": {"type": "object"}},
                {"name": "Edit", "input_schema": {"type": "object"}},
                {"name": "Write", "input_schema": {"type": "object"}},
                {"name": "Bash", "input_schema": {"type": "object"}}
            ],
            "messages": [{"role": "user", "content": "Why does /home/me/app/src/app.py crash on start?"}]
        }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    // The view call comes back as a Read with the client's own path.
    println!("{}", serde_json::to_string_pretty(&reply).unwrap());
}
