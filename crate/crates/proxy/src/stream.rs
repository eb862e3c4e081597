//! Re-framing a streamed chat completion as messages-API events.
//!
//! Text is forwarded as soon as it arrives, except for a short tail that
//! might be the start of a canonical-root path; that tail waits for the
//! next delta so the rewrite sees the whole path. Tool-call fragments are
//! assembled and mapped once the upstream stream ends.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use softverify::chat::ChatChunk;

use crate::messages::ContentBlock;
use crate::paths::{boundary_after, rewrite};
use crate::translate::{map_finish_reason, message_id, MappedCall, Translator};

#[derive(Debug, Clone, PartialEq)]
pub enum BridgeEvent {
    TextDelta(String),
    /// A fully assembled and mapped tool call, or an error text block when
    /// mapping failed.
    Block(ContentBlock),
    Finish { stop_reason: String, output_tokens: u64 },
    Error(String),
}

#[derive(Debug, Default)]
struct PartialCall {
    id: String,
    name: String,
    arguments: String,
}

pub struct StreamBridge<'a> {
    translator: &'a Translator,
    pending: String,
    last_emitted: Option<char>,
    calls: BTreeMap<u32, PartialCall>,
    finish_reason: Option<String>,
    output_tokens: u64,
    done: bool,
}

impl<'a> StreamBridge<'a> {
    pub fn new(translator: &'a Translator) -> Self {
        Self {
            translator,
            pending: String::new(),
            last_emitted: None,
            calls: BTreeMap::new(),
            finish_reason: None,
            output_tokens: 0,
            done: false,
        }
    }

    pub fn push(&mut self, chunk: &ChatChunk) -> Vec<BridgeEvent> {
        if self.done {
            return Vec::new();
        }
        if let Some(u) = &chunk.usage {
            self.output_tokens = u.completion_tokens;
        }
        let mut out = Vec::new();
        for choice in chunk.choices.iter().filter(|c| c.index == 0) {
            if let Some(text) = choice.delta.content.as_deref().filter(|t| !t.is_empty()) {
                self.pending.push_str(text);
                let split = self.split_point();
                if let Some(e) = self.emit_until(split) {
                    out.push(e);
                }
            }
            for d in &choice.delta.tool_calls {
                let call = self.calls.entry(d.index).or_default();
                if let Some(id) = &d.id {
                    call.id.clone_from(id);
                }
                if let Some(name) = &d.function.name {
                    call.name.push_str(name);
                }
                if let Some(args) = &d.function.arguments {
                    call.arguments.push_str(args);
                }
            }
            if let Some(r) = &choice.finish_reason {
                self.finish_reason = Some(r.clone());
            }
        }
        out
    }

    /// Upstream ended cleanly.
    pub fn finish(&mut self) -> Vec<BridgeEvent> {
        if self.done {
            return Vec::new();
        }
        self.done = true;
        let mut out: Vec<_> = self.emit_until(self.pending.len()).into_iter().collect();
        let mut has_tool_use = false;
        for (index, call) in std::mem::take(&mut self.calls) {
            let id = if call.id.is_empty() { format!("toolu_{index}") } else { call.id };
            if let MappedCall::Block(b) = self.translator.map_call(&id, &call.name, &call.arguments) {
                has_tool_use |= matches!(b, ContentBlock::ToolUse { .. });
                out.push(BridgeEvent::Block(b));
            }
        }
        out.push(BridgeEvent::Finish {
            stop_reason: map_finish_reason(self.finish_reason.as_deref(), has_tool_use).into(),
            output_tokens: self.output_tokens,
        });
        out
    }

    /// Upstream failed. Whatever text is held back is still delivered.
    pub fn fail(&mut self, message: &str) -> Vec<BridgeEvent> {
        if self.done {
            return Vec::new();
        }
        self.done = true;
        let mut out: Vec<_> = self.emit_until(self.pending.len()).into_iter().collect();
        out.push(BridgeEvent::Error(message.to_string()));
        out
    }

    /// First byte offset of `pending` whose tail might still turn into a
    /// canonical-root match.
    fn split_point(&self) -> usize {
        let policy = &self.translator.policy;
        let root = policy.canonical_root();
        if root == policy.user_root() {
            return self.pending.len();
        }
        let window = self.pending.len().saturating_sub(root.len() + 2);
        for (p, _) in self.pending.char_indices().filter(|(p, _)| *p >= window) {
            let tail = &self.pending[p..];
            if root.starts_with(tail) || (tail.starts_with(root) && boundary_after(&tail[root.len()..]).is_none()) {
                return p;
            }
        }
        self.pending.len()
    }

    fn emit_until(&mut self, split: usize) -> Option<BridgeEvent> {
        if split == 0 {
            return None;
        }
        let policy = &self.translator.policy;
        let head: String = self.pending.drain(..split).collect();
        let text = rewrite(&head, policy.canonical_root(), policy.user_root(), self.last_emitted);
        self.last_emitted = head.chars().next_back().or(self.last_emitted);
        (!text.is_empty()).then_some(BridgeEvent::TextDelta(text))
    }
}

/// One server-sent event.
#[derive(Debug, Clone, PartialEq)]
pub struct SseFrame {
    pub event: &'static str,
    pub data: Value,
}

impl SseFrame {
    pub fn to_wire(&self) -> String {
        format!("event: {}\ndata: {}\n\n", self.event, self.data)
    }
}

/// Turns bridge events into the messages-API event sequence.
pub struct SseEncoder {
    id: String,
    model: String,
    index: usize,
    text_open: bool,
}

impl SseEncoder {
    pub fn new(upstream_id: &str, client_model: &str) -> Self {
        Self {
            id: message_id(upstream_id),
            model: client_model.to_string(),
            index: 0,
            text_open: false,
        }
    }

    pub fn start(&self) -> SseFrame {
        SseFrame {
            event: "message_start",
            data: json!({"type": "message_start", "message": {
                "id": self.id, "type": "message", "role": "assistant", "model": self.model,
                "content": [], "stop_reason": null, "stop_sequence": null,
                "usage": {"input_tokens": 0, "output_tokens": 0}
            }}),
        }
    }

    fn close_text(&mut self, out: &mut Vec<SseFrame>) {
        if self.text_open {
            out.push(block_stop(self.index));
            self.index += 1;
            self.text_open = false;
        }
    }

    pub fn encode(&mut self, event: &BridgeEvent) -> Vec<SseFrame> {
        let mut out = Vec::new();
        match event {
            BridgeEvent::TextDelta(text) => {
                if !self.text_open {
                    out.push(block_start(self.index, json!({"type": "text", "text": ""})));
                    self.text_open = true;
                }
                out.push(SseFrame {
                    event: "content_block_delta",
                    data: json!({"type": "content_block_delta", "index": self.index,
                                 "delta": {"type": "text_delta", "text": text}}),
                });
            }
            BridgeEvent::Block(ContentBlock::ToolUse { id, name, input }) => {
                self.close_text(&mut out);
                out.push(block_start(self.index, json!({"type": "tool_use", "id": id, "name": name, "input": {}})));
                out.push(SseFrame {
                    event: "content_block_delta",
                    data: json!({"type": "content_block_delta", "index": self.index,
                                 "delta": {"type": "input_json_delta", "partial_json": input.to_string()}}),
                });
                out.push(block_stop(self.index));
                self.index += 1;
            }
            BridgeEvent::Block(other) => {
                self.close_text(&mut out);
                let text = match other {
                    ContentBlock::Text { text } => text.clone(),
                    b => serde_json::to_string(b).unwrap_or_default(),
                };
                out.push(block_start(self.index, json!({"type": "text", "text": ""})));
                out.push(SseFrame {
                    event: "content_block_delta",
                    data: json!({"type": "content_block_delta", "index": self.index,
                                 "delta": {"type": "text_delta", "text": text}}),
                });
                out.push(block_stop(self.index));
                self.index += 1;
            }
            BridgeEvent::Finish {
                stop_reason,
                output_tokens,
            } => {
                self.close_text(&mut out);
                out.push(SseFrame {
                    event: "message_delta",
                    data: json!({"type": "message_delta",
                                 "delta": {"stop_reason": stop_reason, "stop_sequence": null},
                                 "usage": {"output_tokens": output_tokens}}),
                });
                out.push(SseFrame {
                    event: "message_stop",
                    data: json!({"type": "message_stop"}),
                });
            }
            BridgeEvent::Error(message) => {
                out.push(SseFrame {
                    event: "error",
                    data: crate::messages::error_body("api_error", message),
                });
            }
        }
        out
    }
}

fn block_start(index: usize, block: Value) -> SseFrame {
    SseFrame {
        event: "content_block_start",
        data: json!({"type": "content_block_start", "index": index, "content_block": block}),
    }
}

fn block_stop(index: usize) -> SseFrame {
    SseFrame {
        event: "content_block_stop",
        data: json!({"type": "content_block_stop", "index": index}),
    }
}
