//! Deterministic scripted teacher.
//!
//! Its behaviour depends only on the request contents plus a per-function
//! self-rejection counter, so campaigns against it are reproducible.
//!
//! First rollout: view the file, insert two marker lines right after the
//! target `def` line, submit. The PR it writes names the function and a tag
//! derived from the bug prompt, which is all a second rollout needs to
//! redo (all, half or none of) the edit.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::chat::{ChatMessage, ChatRequest, ChatResponse, ChatToolCall};

use super::agent::SELF_EVAL_MARKER;
use super::endpoint::{ChatEndpoint, EndpointError};
use super::functions::enumerate_functions;
use super::sandbox::{EDITOR_TOOL, SUBMIT_TOOL, WORKDIR};

pub const FIRST_ROLLOUT_MARKER: &str = "[first-rollout]";
const FIRST_PROMPT_ANCHOR: &str = " downstream of function ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SecondMode {
    /// Redo both marker lines: recall 1.
    #[default]
    Replay,
    /// Redo only the first marker line: recall 0.5.
    Half,
    /// Add an unrelated line: recall 0.
    Disjoint,
    /// One of the above per function, picked from the edit tag.
    Mixed,
}

impl SecondMode {
    fn resolve(self, tag: &str) -> SecondMode {
        if self != SecondMode::Mixed {
            return self;
        }
        match u8::from_str_radix(tag.get(..2).unwrap_or("0"), 16).unwrap_or(0) % 3 {
            0 => SecondMode::Replay,
            1 => SecondMode::Half,
            _ => SecondMode::Disjoint,
        }
    }
}

#[derive(Debug, Clone)]
struct Located {
    file: String,
    def_line: String,
}

pub struct MockTeacher {
    roots: Vec<PathBuf>,
    pub second_mode: SecondMode,
    /// Function name → number of self-evaluations answered NO before YES.
    pub self_rejections: BTreeMap<String, u32>,
    /// Functions whose first rollout edits but never submits.
    pub stall: BTreeSet<String>,
    /// Functions whose PR request fails with a transport error.
    pub fail_pr: BTreeSet<String>,
    rejected_so_far: Mutex<HashMap<String, u32>>,
    log: Mutex<Vec<ChatRequest>>,
}

fn tag_for(bug_and_function: &str) -> String {
    Sha256::digest(bug_and_function.as_bytes())
        .iter()
        .take(4)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let rest = &text[from..];
    Some(&rest[..rest.find(end).unwrap_or(rest.len())])
}

fn line_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.trim().strip_prefix(key)).map(str::trim)
}

fn call(turn: usize, name: &str, args: serde_json::Value) -> ChatMessage {
    ChatMessage {
        role: "assistant".into(),
        tool_calls: vec![ChatToolCall::new(format!("call_{turn}"), name, args.to_string())],
        ..ChatMessage::default()
    }
}

fn reply(message: ChatMessage) -> ChatResponse {
    let finish = if message.tool_calls.is_empty() { "stop" } else { "tool_calls" };
    ChatResponse {
        model: "mock-teacher".into(),
        ..ChatResponse::from_message(message, finish)
    }
}

impl MockTeacher {
    pub fn new(roots: Vec<PathBuf>) -> Self {
        Self {
            roots,
            second_mode: SecondMode::Replay,
            self_rejections: BTreeMap::new(),
            stall: BTreeSet::new(),
            fail_pr: BTreeSet::new(),
            rejected_so_far: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_second_mode(mut self, mode: SecondMode) -> Self {
        self.second_mode = mode;
        self
    }

    /// Every request received so far, in arrival order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().expect("mock log poisoned").clone()
    }

    fn locate(&self, name: &str) -> Option<Located> {
        for root in &self.roots {
            let Ok(funcs) = enumerate_functions(root) else { continue };
            if let Some(f) = funcs.iter().find(|f| f.name == name) {
                let text = fs::read_to_string(root.join(&f.file)).ok()?;
                let def_line = text.lines().nth(f.line - 1)?.to_string();
                return Some(Located {
                    file: f.file.clone(),
                    def_line,
                });
            }
        }
        None
    }

    fn marker_lines(def_line: &str, tag: &str, mode: Option<SecondMode>) -> String {
        let indent: String = def_line.chars().take_while(|c| c.is_whitespace()).collect();
        let body = format!("{indent}    ");
        let check = format!("{body}_mock_check = \"{tag}\"");
        let seen = format!("{body}_mock_seen = \"{tag}\"");
        match mode {
            None | Some(SecondMode::Replay) | Some(SecondMode::Mixed) => format!("{def_line}\n{check}\n{seen}"),
            Some(SecondMode::Half) => format!("{def_line}\n{check}"),
            Some(SecondMode::Disjoint) => format!("{def_line}\n{body}_mock_other = \"{tag}\""),
        }
    }

    /// Shared script for both rollouts: view, edit, submit.
    fn rollout_turn(
        &self,
        turn: usize,
        function: &str,
        tag: &str,
        mode: Option<SecondMode>,
        stall: bool,
    ) -> Result<ChatMessage, EndpointError> {
        let Some(loc) = self.locate(function) else {
            return Ok(ChatMessage::text("assistant", format!("I could not find `{function}`.")));
        };
        let path = format!("{WORKDIR}/{}", loc.file);
        let mut msg = match turn {
            0 => call(turn, EDITOR_TOOL, json!({"command": "view", "path": path})),
            1 => call(
                turn,
                EDITOR_TOOL,
                json!({
                    "command": "str_replace",
                    "path": path,
                    "old_str": loc.def_line,
                    "new_str": Self::marker_lines(&loc.def_line, tag, mode),
                }),
            ),
            _ if stall => call(turn, EDITOR_TOOL, json!({"command": "view", "path": path, "view_range": [1, 1]})),
            _ => call(turn, SUBMIT_TOOL, json!({})),
        };
        if mode.is_none() {
            msg.reasoning_content = Some(format!("{FIRST_ROLLOUT_MARKER} step {turn} on {function}"));
        }
        Ok(msg)
    }

    fn respond(&self, req: &ChatRequest) -> Result<ChatResponse, EndpointError> {
        let first_user = req
            .messages
            .iter()
            .find(|m| m.role == "user")
            .and_then(|m| m.content.as_deref())
            .unwrap_or("");
        let turn = req.messages.iter().filter(|m| m.role == "assistant").count();
        if req.tools.is_empty() {
            if first_user.contains(SELF_EVAL_MARKER) {
                let function = between(first_user, FIRST_PROMPT_ANCHOR, ".\n").unwrap_or("").to_string();
                let budget = self.self_rejections.get(&function).copied().unwrap_or(0);
                let mut seen = self.rejected_so_far.lock().expect("mock state poisoned");
                let used = seen.entry(function).or_insert(0);
                let verdict = if *used < budget {
                    *used += 1;
                    "NO\nThe change does not match the request."
                } else {
                    "YES\nThe change matches the request."
                };
                return Ok(reply(ChatMessage::text("assistant", verdict)));
            }
            // PR writer: recover the function from the transcript and the tag from the patch.
            let function = between(first_user, FIRST_PROMPT_ANCHOR, ".\n").unwrap_or("unknown").to_string();
            if self.fail_pr.contains(&function) {
                return Err(EndpointError::Transport(format!("scripted failure for {function}")));
            }
            let tag = between(first_user, "_mock_check = \"", "\"").unwrap_or("none");
            let text = format!(
                "Title: Record a check marker in `{function}`\n\n\
### Description\n\n`{function}` should record a check marker as soon as it is called.\n\n\
Function: {function}\nTag: {tag}\n"
            );
            return Ok(reply(ChatMessage::text("assistant", text)));
        }
        if let Some(rest) = first_user.split_once(FIRST_PROMPT_ANCHOR) {
            let function = rest.1.strip_suffix('.').unwrap_or(rest.1).to_string();
            let tag = tag_for(first_user);
            let stall = self.stall.contains(&function);
            return self.rollout_turn(turn, &function, &tag, None, stall).map(reply);
        }
        let function = line_value(first_user, "Function:").unwrap_or("").to_string();
        let tag = line_value(first_user, "Tag:").unwrap_or("").to_string();
        self.rollout_turn(turn, &function, &tag, Some(self.second_mode.resolve(&tag)), false)
            .map(reply)
    }
}

impl ChatEndpoint for MockTeacher {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, EndpointError> {
        self.log.lock().expect("mock log poisoned").push(request.clone());
        self.respond(request)
    }
}
