//! Scripted request/reply pairs and streams for round-trip testing.

use serde_json::json;
use softverify::chat::{ChatChunk, ChatMessage, ChatResponse, ChatToolCall, ChunkChoice, Delta, FunctionDelta, ToolCallDelta};

use crate::mapping::{self, CLIENT_TOOLS};
use crate::messages::{ClientTool, Content, ContentBlock, Message, MessagesRequest, Role, ToolResultContent};
use crate::paths::PathPolicy;

/// A client request and the model reply it should be answered with.
#[derive(Debug, Clone)]
pub struct FixturePair {
    pub request: MessagesRequest,
    pub reply: ChatResponse,
}

const FILES: [&str; 5] = ["src/app.py", "lib/util.py", "tests/test_app.py", "README.md", "pkg/deep/mod.py"];

fn client_input(tool: &str, path: &str, i: usize) -> serde_json::Value {
    match tool {
        "Read" if i.is_multiple_of(3) => json!({"file_path": path}),
        "Read" if i % 3 == 1 => json!({"file_path": path, "offset": i + 1}),
        "Read" => json!({"file_path": path, "offset": i, "limit": 10}),
        "Edit" => json!({"file_path": path, "old_string": format!("x = {i}\n"), "new_string": format!("x = {}  \n", i + 1)}),
        "Write" => json!({"file_path": path, "content": format!("# generated\n\tvalue = {i}\n")}),
        _ => json!({"command": format!("grep -n def {path} | head -{i}")}),
    }
}

/// Twenty pairs cycling through Read, Edit, Write and Bash. Every text,
/// argument and tool result mentions paths under the relevant root.
pub fn round_trip_pairs(policy: &PathPolicy) -> Vec<FixturePair> {
    let user = policy.user_root();
    let canon = policy.canonical_root();
    (0..20)
        .map(|i| {
            let tool = CLIENT_TOOLS[i % 4];
            let file = FILES[i % FILES.len()];
            let user_path = format!("{user}/{file}");
            let input = client_input(tool, &user_path, i);
            let request = MessagesRequest {
                model: "client-model".into(),
                max_tokens: 1024 + i as u32,
                system: Some(Content::Text(format!("You work in {user}. Keep  two spaces.\n"))),
                tools: CLIENT_TOOLS
                    .iter()
                    .map(|n| ClientTool {
                        name: n.to_string(),
                        description: Some(format!("{n} tool")),
                        input_schema: json!({"type": "object"}),
                    })
                    .collect(),
                temperature: Some(0.25 * (i % 3) as f64),
                messages: vec![
                    Message {
                        role: Role::User,
                        content: Content::Text(format!("Fix the bug in {user_path}, see also `{user}`.\n\ttab line #{i}")),
                    },
                    Message {
                        role: Role::Assistant,
                        content: Content::Blocks(vec![
                            ContentBlock::Text {
                                text: format!("Looking at {user_path} first."),
                            },
                            ContentBlock::ToolUse {
                                id: format!("toolu_{i:02}"),
                                name: tool.into(),
                                input,
                            },
                        ]),
                    },
                    Message {
                        role: Role::User,
                        content: Content::Blocks(vec![ContentBlock::ToolResult {
                            tool_use_id: format!("toolu_{i:02}"),
                            content: ToolResultContent::Text(format!(
                                "{user_path}:3:def f():\n{user}/other.py  \n   trailing   "
                            )),
                            is_error: false,
                        }]),
                    },
                ],
                ..MessagesRequest::default()
            };
            // the model answers in canonical paths with the scaffold tool
            let canon_input = client_input(CLIENT_TOOLS[(i + 1) % 4], &format!("{canon}/{file}"), i + 7);
            let (scaffold, args) = mapping::to_scaffold(CLIENT_TOOLS[(i + 1) % 4], &canon_input).expect("fixture maps");
            let mut message = ChatMessage::text("assistant", format!("Next I will touch {canon}/{file} and {canon}."));
            message.tool_calls.push(ChatToolCall::new(format!("call_{i:02}"), scaffold, args.to_string()));
            FixturePair {
                request,
                reply: ChatResponse::from_message(message, "tool_calls"),
            }
        })
        .collect()
}

fn text_chunk(text: &str) -> ChatChunk {
    ChatChunk {
        id: "chatcmpl-fixture".into(),
        model: "upstream".into(),
        choices: vec![ChunkChoice {
            index: 0,
            delta: Delta {
                content: Some(text.into()),
                ..Delta::default()
            },
            finish_reason: None,
        }],
        usage: None,
    }
}

/// `n` text deltas with no path content, then a stop chunk.
pub fn plain_stream(n: usize) -> Vec<ChatChunk> {
    let mut out: Vec<_> = (0..n).map(|i| text_chunk(&format!("tok{i} "))).collect();
    out.push(finish_chunk("stop"));
    out
}

/// `n` deltas whose concatenation mentions canonical paths, with the
/// paths split at awkward places.
pub fn path_stream(canonical_root: &str, n: usize) -> Vec<ChatChunk> {
    let mut text = String::new();
    let mut k = 0;
    while text.chars().count() < n * 3 {
        text.push_str(&format!("edit {canonical_root}/f{k}.py; "));
        k += 1;
    }
    let chars: Vec<char> = text.chars().collect();
    let per = chars.len().div_ceil(n);
    let mut out: Vec<_> = chars.chunks(per).map(|c| text_chunk(&c.iter().collect::<String>())).collect();
    while out.len() < n {
        out.push(text_chunk("."));
    }
    out.push(finish_chunk("stop"));
    out
}

/// A tool call whose name and arguments arrive in fragments.
pub fn split_tool_call_stream(canonical_root: &str) -> Vec<ChatChunk> {
    let args = json!({"command": "view", "path": format!("{canonical_root}/src/app.py"), "view_range": [3, 9]}).to_string();
    let (a, b) = args.split_at(args.len() / 2);
    let frag = |id: Option<&str>, name: Option<&str>, arguments: &str| ChatChunk {
        choices: vec![ChunkChoice {
            index: 0,
            delta: Delta {
                tool_calls: vec![ToolCallDelta {
                    index: 0,
                    id: id.map(Into::into),
                    kind: id.map(|_| "function".into()),
                    function: FunctionDelta {
                        name: name.map(Into::into),
                        arguments: Some(arguments.into()),
                    },
                }],
                ..Delta::default()
            },
            finish_reason: None,
        }],
        ..ChatChunk::default()
    };
    vec![
        text_chunk("Opening the file."),
        frag(Some("call_split"), Some("str_replace"), ""),
        frag(None, Some("_editor"), a),
        frag(None, None, b),
        finish_chunk("tool_calls"),
    ]
}

pub fn finish_chunk(reason: &str) -> ChatChunk {
    ChatChunk {
        choices: vec![ChunkChoice {
            index: 0,
            delta: Delta::default(),
            finish_reason: Some(reason.into()),
        }],
        ..ChatChunk::default()
    }
}

/// Verifies one pair end to end. Outbound text must equal the inbound
/// text with user paths rewritten, and mapping the outbound back must
/// restore the inbound exactly. The same holds for the reply direction.
pub fn check_round_trip(t: &crate::translate::Translator, pair: &FixturePair) -> Result<(), String> {
    let policy = &t.policy;
    let out = t.translate_request(&pair.request).map_err(|e| e.to_string())?;
    let names: Vec<&str> = out.tools.iter().map(|s| s.function.name.as_str()).collect();
    if names.iter().any(|n| CLIENT_TOOLS.contains(n)) {
        return Err(format!("client tool name forwarded: {names:?}"));
    }

    let mut expected_texts = Vec::new();
    if let Some(s) = &pair.request.system {
        expected_texts.push(s.joined_text());
    }
    let mut expected_calls = Vec::new();
    let mut expected_results = Vec::new();
    for m in &pair.request.messages {
        let mut texts = Vec::new();
        for b in m.content.blocks() {
            match b {
                ContentBlock::Text { text } => texts.push(text),
                ContentBlock::ToolUse { id, name, input } => expected_calls.push((id, name, input)),
                ContentBlock::ToolResult { content, .. } => expected_results.push(content.text()),
                _ => {}
            }
        }
        if !texts.is_empty() {
            expected_texts.push(texts.join("\n"));
        }
    }
    let got_texts: Vec<&str> = out
        .messages
        .iter()
        .filter(|m| m.role != "tool")
        .filter_map(|m| m.content.as_deref())
        .collect();
    if got_texts.len() != expected_texts.len() {
        return Err(format!("text message count {} != {}", got_texts.len(), expected_texts.len()));
    }
    for (got, want) in got_texts.iter().zip(&expected_texts) {
        if *got != policy.to_canonical(want) {
            return Err(format!("text not preserved: {got:?} vs {want:?}"));
        }
        if policy.to_user(got) != *want {
            return Err(format!("path rewrite not invertible: {got:?}"));
        }
    }
    let got_results: Vec<&str> = out
        .messages
        .iter()
        .filter(|m| m.role == "tool")
        .filter_map(|m| m.content.as_deref())
        .collect();
    for (got, want) in got_results.iter().zip(&expected_results) {
        if policy.to_user(got) != *want {
            return Err(format!("tool result not preserved: {got:?}"));
        }
    }
    let got_calls: Vec<_> = out.messages.iter().flat_map(|m| &m.tool_calls).collect();
    if got_calls.len() != expected_calls.len() || got_results.len() != expected_results.len() {
        return Err("tool call or result count changed".into());
    }
    for (got, (id, name, input)) in got_calls.iter().zip(&expected_calls) {
        let args: serde_json::Value = serde_json::from_str(&got.function.arguments).map_err(|e| e.to_string())?;
        let (back, back_input) = mapping::to_client(&got.function.name, &args).map_err(|e| e.to_string())?;
        if got.id != *id || back.name() != name || policy.to_user_value(&back_input) != *input {
            return Err(format!("tool call {id} did not invert: {back_input}"));
        }
    }

    let resp = t.translate_response(&pair.reply, &pair.request.model);
    let reply = pair.reply.first_message().ok_or("reply has no message")?;
    let mut blocks = resp.content.iter();
    if let Some(text) = &reply.content {
        match blocks.next() {
            Some(ContentBlock::Text { text: got }) if policy.to_canonical(got) == *text => {}
            other => return Err(format!("reply text not preserved: {other:?}")),
        }
    }
    for call in &reply.tool_calls {
        let Some(ContentBlock::ToolUse { id, name, input }) = blocks.next() else {
            return Err(format!("reply call {} missing", call.id));
        };
        let (scaffold, args) = mapping::to_scaffold(name, &policy.to_canonical_value(input)).map_err(|e| e.to_string())?;
        let want: serde_json::Value = serde_json::from_str(&call.function.arguments).map_err(|e| e.to_string())?;
        if *id != call.id || scaffold != call.function.name || args != want {
            return Err(format!("reply call {id} did not invert"));
        }
    }
    if resp.stop_reason.as_deref() != Some("tool_use") {
        return Err(format!("stop reason {:?}", resp.stop_reason));
    }
    Ok(())
}
