//! Request and response translation between the two wire formats.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use softverify::chat::{ChatMessage, ChatRequest, ChatResponse, ChatToolCall};
use softverify::orchestrate::catalog::render_template;
use thiserror::Error;
use tracing::debug;

use crate::mapping::{self, ClientTool, MappingError, SUBMIT};
use crate::messages::{
    Content, ContentBlock, MessagesRequest, MessagesResponse, MessagesUsage, Role, ToolChoice,
};
use crate::paths::PathPolicy;

/// Observation templates per client tool. `{content}` is the tool output
/// after path rewriting, `{tool}` the scaffold tool name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResultTemplates {
    pub read: String,
    pub edit: String,
    pub write: String,
    pub bash: String,
}

impl Default for ResultTemplates {
    fn default() -> Self {
        Self {
            read: "{content}".into(),
            edit: "{content}".into(),
            write: "{content}".into(),
            bash: "{content}".into(),
        }
    }
}

impl ResultTemplates {
    pub fn render(&self, tool: ClientTool, content: &str) -> String {
        let t = match tool {
            ClientTool::Read => &self.read,
            ClientTool::Edit => &self.edit,
            ClientTool::Write => &self.write,
            ClientTool::Bash => &self.bash,
        };
        render_template(t, &[("content", content), ("tool", tool.scaffold_tool())])
    }
}

#[derive(Debug, Clone)]
pub struct Translator {
    pub policy: PathPolicy,
    pub templates: ResultTemplates,
    /// Upstream model id; replaces whatever the client asked for.
    pub model_id: String,
    /// Skip client tools with no scaffold equivalent instead of failing.
    pub drop_unknown_tools: bool,
    /// Offer the scaffold's `submit` tool to the model.
    pub advertise_submit: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranslateError {
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("invalid request at `{pointer}`: {message}")]
    Schema { pointer: String, message: String },
}

impl TranslateError {
    pub fn kind(&self) -> &'static str {
        "invalid_request_error"
    }
}

/// Parses a body with a JSON pointer to the first offending field.
pub fn parse_request(body: &[u8]) -> Result<MessagesRequest, TranslateError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        TranslateError::Schema {
            pointer: if path == "." { "/".into() } else { format!("/{}", path.replace('.', "/")) },
            message: e.into_inner().to_string(),
        }
    })
}

pub fn map_finish_reason(reason: Option<&str>, has_tool_use: bool) -> &'static str {
    if has_tool_use {
        return "tool_use";
    }
    match reason {
        Some("length") => "max_tokens",
        Some("tool_calls") | Some("function_call") => "tool_use",
        _ => "end_turn",
    }
}

/// Result of mapping one assembled scaffold tool call.
#[derive(Debug, Clone, PartialEq)]
pub enum MappedCall {
    Block(ContentBlock),
    /// The model called `submit`; nothing to forward.
    Submit,
}

impl Translator {
    pub fn translate_request(&self, req: &MessagesRequest) -> Result<ChatRequest, TranslateError> {
        for key in req.unknown.keys() {
            debug!(field = %key, "dropping unknown request field");
        }
        let mut editor = false;
        let mut bash = false;
        for t in &req.tools {
            match ClientTool::parse(&t.name) {
                Some(ClientTool::Bash) => bash = true,
                Some(_) => editor = true,
                None if self.drop_unknown_tools => debug!(tool = %t.name, "dropping unmapped client tool"),
                None => return Err(MappingError::UnknownClientTool { name: t.name.clone() }.into()),
            }
        }
        let has_tools = editor || bash;
        let tools = mapping::scaffold_specs(bash, editor, has_tools && self.advertise_submit);

        let mut messages = Vec::new();
        if let Some(system) = &req.system {
            messages.push(ChatMessage::system(self.policy.to_canonical(&system.joined_text())));
        }
        let mut call_tools: BTreeMap<String, ClientTool> = BTreeMap::new();
        let mut dropped_calls: BTreeSet<String> = BTreeSet::new();
        for m in &req.messages {
            match m.role {
                Role::User => self.user_message(&m.content, &call_tools, &dropped_calls, &mut messages),
                Role::Assistant => {
                    messages.push(self.assistant_message(&m.content, &mut call_tools, &mut dropped_calls)?)
                }
            }
        }

        let tool_choice = match (&req.tool_choice, has_tools) {
            (None, _) | (_, false) => None,
            (Some(ToolChoice::Auto), _) => Some(json!("auto")),
            (Some(ToolChoice::Any), _) => Some(json!("required")),
            (Some(ToolChoice::None), _) => Some(json!("none")),
            (Some(ToolChoice::Tool { name }), _) => {
                let tool = ClientTool::parse(name).ok_or_else(|| MappingError::UnknownClientTool { name: name.clone() })?;
                Some(json!({"type": "function", "function": {"name": tool.scaffold_tool()}}))
            }
        };

        Ok(ChatRequest {
            model: self.model_id.clone(),
            messages,
            tools,
            tool_choice,
            max_tokens: Some(req.max_tokens),
            temperature: req.temperature,
            top_p: req.top_p,
            stop: req.stop_sequences.clone(),
            stream: req.stream.then_some(true),
        })
    }

    fn user_message(
        &self,
        content: &Content,
        call_tools: &BTreeMap<String, ClientTool>,
        dropped: &BTreeSet<String>,
        out: &mut Vec<ChatMessage>,
    ) {
        let blocks = match content {
            Content::Text(t) => {
                out.push(ChatMessage::user(self.policy.to_canonical(t)));
                return;
            }
            Content::Blocks(b) => b,
        };
        // Tool messages must directly follow the assistant turn that asked
        // for them, so they go before any user text in the same message.
        let mut texts = Vec::new();
        let mut had_results = false;
        for b in blocks {
            match b {
                ContentBlock::ToolResult {
                    tool_use_id, content, ..
                } => {
                    if dropped.contains(tool_use_id) {
                        continue;
                    }
                    had_results = true;
                    let text = self.policy.to_canonical(&content.text());
                    let rendered = match call_tools.get(tool_use_id) {
                        Some(tool) => self.templates.render(*tool, &text),
                        None => text,
                    };
                    out.push(ChatMessage::tool_result(tool_use_id.clone(), rendered));
                }
                ContentBlock::Text { text } => texts.push(self.policy.to_canonical(text)),
                other => debug!(block = ?block_kind(other), "dropping unsupported user block"),
            }
        }
        if !texts.is_empty() || !had_results {
            out.push(ChatMessage::user(texts.join("\n")));
        }
    }

    fn assistant_message(
        &self,
        content: &Content,
        call_tools: &mut BTreeMap<String, ClientTool>,
        dropped: &mut BTreeSet<String>,
    ) -> Result<ChatMessage, TranslateError> {
        let mut msg = ChatMessage {
            role: "assistant".into(),
            ..ChatMessage::default()
        };
        let mut texts = Vec::new();
        let mut thoughts = Vec::new();
        for b in content.blocks() {
            match b {
                ContentBlock::Text { text } => texts.push(self.policy.to_canonical(&text)),
                ContentBlock::Thinking { thinking, .. } => thoughts.push(thinking),
                ContentBlock::ToolUse { id, name, input } => {
                    let input = self.policy.to_canonical_value(&input);
                    match mapping::to_scaffold(&name, &input) {
                        Ok((scaffold, args)) => {
                            call_tools.insert(id.clone(), ClientTool::parse(&name).expect("mapped"));
                            msg.tool_calls.push(ChatToolCall::new(id, scaffold, args.to_string()));
                        }
                        Err(MappingError::UnknownClientTool { .. }) if self.drop_unknown_tools => {
                            dropped.insert(id);
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
                other => debug!(block = ?block_kind(&other), "dropping unsupported assistant block"),
            }
        }
        if !texts.is_empty() || msg.tool_calls.is_empty() {
            msg.content = Some(texts.join("\n"));
        }
        if !thoughts.is_empty() {
            msg.reasoning_content = Some(thoughts.join("\n"));
        }
        Ok(msg)
    }

    /// Maps one assembled scaffold call. Failures become a text block so
    /// the rest of the reply still reaches the client.
    pub fn map_call(&self, id: &str, name: &str, arguments: &str) -> MappedCall {
        if name == SUBMIT {
            return MappedCall::Submit;
        }
        let parsed = if arguments.trim().is_empty() {
            Ok(json!({}))
        } else {
            serde_json::from_str::<Value>(arguments)
        };
        let result = parsed
            .map_err(|e| format!("arguments for `{name}` are not JSON: {e}"))
            .and_then(|args| mapping::to_client(name, &args).map_err(|e| e.to_string()));
        match result {
            Ok((tool, input)) => MappedCall::Block(ContentBlock::ToolUse {
                id: id.to_string(),
                name: tool.name().to_string(),
                input: self.policy.to_user_value(&input),
            }),
            Err(reason) => MappedCall::Block(ContentBlock::Text {
                text: format!("[proxy error] could not map tool call {id}: {reason}"),
            }),
        }
    }

    pub fn translate_response(&self, resp: &ChatResponse, client_model: &str) -> MessagesResponse {
        let choice = resp.choices.first();
        let mut content = Vec::new();
        let mut has_tool_use = false;
        if let Some(m) = choice.map(|c| &c.message) {
            if let Some(text) = m.content.as_deref().filter(|t| !t.is_empty()) {
                content.push(ContentBlock::Text {
                    text: self.policy.to_user(text),
                });
            }
            for call in &m.tool_calls {
                if let MappedCall::Block(b) = self.map_call(&call.id, &call.function.name, &call.function.arguments) {
                    has_tool_use |= matches!(b, ContentBlock::ToolUse { .. });
                    content.push(b);
                }
            }
        }
        let usage = resp.usage.as_ref().map_or_else(MessagesUsage::default, |u| MessagesUsage {
            input_tokens: u.prompt_tokens,
            output_tokens: u.completion_tokens,
        });
        MessagesResponse {
            id: message_id(&resp.id),
            kind: "message".into(),
            role: "assistant".into(),
            model: client_model.to_string(),
            content,
            stop_reason: Some(
                map_finish_reason(choice.and_then(|c| c.finish_reason.as_deref()), has_tool_use).into(),
            ),
            stop_sequence: None,
            usage,
        }
    }
}

pub(crate) fn message_id(upstream: &str) -> String {
    if upstream.is_empty() { "msg_proxy".into() } else { format!("msg_{upstream}") }
}

fn block_kind(b: &ContentBlock) -> &'static str {
    match b {
        ContentBlock::Text { .. } => "text",
        ContentBlock::ToolUse { .. } => "tool_use",
        ContentBlock::ToolResult { .. } => "tool_result",
        ContentBlock::Thinking { .. } => "thinking",
        ContentBlock::Unsupported => "unsupported",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_errors_carry_a_pointer() {
        let e = parse_request(br#"{"model":"m","max_tokens":"ten","messages":[]}"#).unwrap_err();
        let TranslateError::Schema { pointer, .. } = e else { panic!() };
        assert_eq!(pointer, "/max_tokens");
        let e = parse_request(br#"{"model":"m","max_tokens":1,"messages":[{"role":"bot","content":"x"}]}"#).unwrap_err();
        let TranslateError::Schema { pointer, .. } = e else { panic!() };
        assert!(pointer.starts_with("/messages"), "{pointer}");
    }

    #[test]
    fn finish_reasons() {
        assert_eq!(map_finish_reason(Some("stop"), false), "end_turn");
        assert_eq!(map_finish_reason(Some("length"), false), "max_tokens");
        assert_eq!(map_finish_reason(Some("tool_calls"), false), "tool_use");
        assert_eq!(map_finish_reason(Some("stop"), true), "tool_use");
        assert_eq!(map_finish_reason(None, false), "end_turn");
    }
}
