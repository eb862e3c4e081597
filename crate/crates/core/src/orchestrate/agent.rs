//! The tool-calling agent loop and the three generation stages built on it.

use std::collections::HashSet;
use std::sync::Mutex;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::chat::{ChatMessage, ChatRequest, ChatToolCall, ToolSpec};
use crate::patchdiff::{parse_unified_diff, NormalizedPatch, Patch};
use crate::trajectory::{Metadata, Role, RolloutStage, Step, ToolCall, Trajectory};

use super::catalog::{render_first_prompt, render_template, BugEntry, BugPromptCatalog, Demonstration, DEFAULT_FIRST_TEMPLATE};
use super::endpoint::{ChatEndpoint, EndpointConfig, EndpointError};
use super::functions::FunctionRef;
use super::sandbox::{Sandbox, ShellPolicy, BASH_TOOL, EDITOR_TOOL, SUBMIT_TOOL};
use super::{CodebaseRef, OrchestrateError};

pub const MAX_ATTEMPTS: u32 = 3;

/// Substring the self-evaluation prompt must contain; the reply's first
/// line is read as the verdict.
pub const SELF_EVAL_MARKER: &str = "Answer YES or NO on the first line";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Prompts {
    pub system: String,
    /// Slots: `{bug}`, `{function}`, `{file}`.
    pub first_template: String,
    /// Slots: `{task}`, `{patch}`.
    pub self_eval: String,
    /// Slots: `{demonstration}`, `{transcript}`, `{patch}`.
    pub pr_writer: String,
    /// Slot: `{pr}`.
    pub second_template: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Self {
            system: "You are a software engineer working in a Python repository checked out at /testbed. \
Use the str_replace_editor tool to inspect and edit files. When you are finished, call the submit tool."
                .into(),
            first_template: DEFAULT_FIRST_TEMPLATE.into(),
            self_eval: format!(
                "You were given this task:\n\n{{task}}\n\nYour rollout produced the following patch:\n\n{{patch}}\n\n\
Did you make a change to the code that is aligned with the task? {SELF_EVAL_MARKER}, then explain briefly."
            ),
            pr_writer: "Here is an example pull request description:\n\n<demonstration>\n{demonstration}\n</demonstration>\n\n\
Below is the transcript of a coding session and the patch it produced.\n\n<transcript>\n{transcript}\n</transcript>\n\n\
<patch>\n{patch}\n</patch>\n\n\
Write a new pull request description that follows the format of the example. It should describe the change made by \
the patch so that another engineer could implement the same change without seeing the patch or the transcript. \
Start with a line `Title: <title>`, followed by the body."
                .into(),
            second_template: "<pr_description>\n{pr}\n</pr_description>\n\n\
The repository at /testbed needs the changes described in the pull request above. Make the changes to non-test files, \
then call submit."
                .into(),
        }
    }
}

pub fn scaffold_tools(shell: &ShellPolicy) -> Vec<ToolSpec> {
    let mut tools = vec![ToolSpec::function(
        EDITOR_TOOL,
        "View, create and edit files. `view` shows a file with line numbers (optionally a [start, end] range) or lists \
a directory two levels deep. `str_replace` replaces exactly one occurrence of old_str. `create` writes a new file.",
        json!({
            "type": "object",
            "properties": {
                "command": {"type": "string", "enum": ["view", "str_replace", "create"]},
                "path": {"type": "string", "description": "Absolute path under /testbed."},
                "view_range": {"type": "array", "items": {"type": "integer"}},
                "old_str": {"type": "string"},
                "new_str": {"type": "string"},
                "file_text": {"type": "string"}
            },
            "required": ["command", "path"]
        }),
    )];
    if shell.enabled {
        tools.push(ToolSpec::function(
            BASH_TOOL,
            &format!("Run one command without shell operators. Allowed programs: {}.", shell.allow.join(", ")),
            json!({
                "type": "object",
                "properties": {"command": {"type": "string"}},
                "required": ["command"]
            }),
        ));
    }
    tools.push(ToolSpec::function(
        SUBMIT_TOOL,
        "Finish the task. Your current changes are collected as the final patch.",
        json!({"type": "object", "properties": {}}),
    ));
    tools
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    Submitted,
    /// The model answered without calling a tool.
    NoToolCall,
    StepCap,
    ContextOverflow,
}

impl ExitReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExitReason::Submitted => "submitted",
            ExitReason::NoToolCall => "no_tool_call",
            ExitReason::StepCap => "step_cap",
            ExitReason::ContextOverflow => "context_overflow",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentRun {
    pub steps: Vec<Step>,
    pub patch: String,
    pub exit: ExitReason,
    /// Assistant turns taken; never above `max_steps`.
    pub turns: usize,
}

/// Everything a rollout needs besides the codebase.
pub struct RolloutEnv<'a> {
    pub endpoint: &'a dyn ChatEndpoint,
    pub config: &'a EndpointConfig,
    pub prompts: &'a Prompts,
    pub shell: &'a ShellPolicy,
}

impl RolloutEnv<'_> {
    fn request(&self, messages: Vec<ChatMessage>, tools: Vec<ToolSpec>) -> ChatRequest {
        ChatRequest {
            model: self.config.model_id.clone(),
            messages,
            tools,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
            ..ChatRequest::default()
        }
    }

    /// One tool-free completion; returns the reply text.
    fn ask(&self, prompt: String) -> Result<String, EndpointError> {
        let resp = self.endpoint.complete(&self.request(vec![ChatMessage::user(prompt)], Vec::new()))?;
        let msg = resp
            .first_message()
            .ok_or_else(|| EndpointError::Decode("response has no choices".into()))?;
        Ok(msg.content.clone().unwrap_or_default())
    }
}

fn parse_arguments(raw: &str) -> Result<Map<String, Value>, String> {
    if raw.trim().is_empty() {
        return Ok(Map::new());
    }
    match serde_json::from_str::<Value>(raw) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err("tool arguments must be a JSON object".into()),
        Err(e) => Err(format!("tool arguments are not valid JSON: {e}")),
    }
}

/// Runs the loop until submit, a tool-free reply, the step cap or a
/// context overflow. Tool outputs and history are never truncated.
pub fn run_agent(
    env: &RolloutEnv<'_>,
    sandbox: &mut Sandbox,
    task: &str,
) -> Result<AgentRun, EndpointError> {
    let tools = scaffold_tools(env.shell);
    let mut messages = vec![ChatMessage::system(env.prompts.system.clone()), ChatMessage::user(task)];
    let mut steps = vec![Step::new(Role::System, env.prompts.system.clone()), Step::new(Role::User, task)];
    let mut turns = 0;
    let mut exit = ExitReason::StepCap;
    let mut submitted = None;
    'outer: while turns < env.config.max_steps {
        let resp = match env.endpoint.complete(&env.request(messages.clone(), tools.clone())) {
            Ok(r) => r,
            Err(EndpointError::ContextOverflow(msg)) => {
                tracing::info!(turns, "rollout stopped by context overflow: {msg}");
                exit = ExitReason::ContextOverflow;
                break;
            }
            Err(e) => return Err(e),
        };
        let mut msg = resp
            .first_message()
            .cloned()
            .ok_or_else(|| EndpointError::Decode("response has no choices".into()))?;
        turns += 1;
        msg.role = "assistant".into();
        for (i, call) in msg.tool_calls.iter_mut().enumerate() {
            if call.id.is_empty() {
                call.id = format!("call_{turns}_{i}");
            }
        }
        let parsed: Vec<Result<Map<String, Value>, String>> =
            msg.tool_calls.iter().map(|c| parse_arguments(&c.function.arguments)).collect();
        let mut step = Step::new(Role::Assistant, msg.content.clone().unwrap_or_default());
        step.reasoning = msg.reasoning_content.clone().filter(|r| !r.is_empty());
        step.tool_calls = msg
            .tool_calls
            .iter()
            .zip(&parsed)
            .map(|(c, args)| ToolCall {
                id: c.id.clone(),
                name: c.function.name.clone(),
                arguments: args.clone().unwrap_or_default(),
            })
            .collect();
        steps.push(step);
        let calls: Vec<ChatToolCall> = msg.tool_calls.clone();
        messages.push(msg);
        if calls.is_empty() {
            exit = ExitReason::NoToolCall;
            break;
        }
        for (call, args) in calls.iter().zip(parsed) {
            let outcome = match args {
                Ok(a) => sandbox.execute(&call.function.name, &a),
                Err(e) => super::sandbox::ToolOutcome {
                    output: format!("Error: {e}"),
                    submitted: None,
                },
            };
            steps.push(Step::tool(outcome.output.clone()));
            messages.push(ChatMessage::tool_result(call.id.clone(), outcome.output));
            if let Some(patch) = outcome.submitted {
                submitted = Some(patch);
                exit = ExitReason::Submitted;
                break 'outer;
            }
        }
    }
    let patch = match submitted {
        Some(p) => p,
        None => sandbox.diff().map_err(|e| EndpointError::Transport(format!("sandbox diff failed: {e}")))?,
    };
    for (i, s) in steps.iter_mut().enumerate() {
        s.index = i;
    }
    Ok(AgentRun {
        steps,
        patch,
        exit,
        turns,
    })
}

/// Patches already produced in a run, for duplicate rejection.
#[derive(Debug, Default)]
pub struct PatchStore {
    seen: Mutex<HashSet<NormalizedPatch>>,
}

impl PatchStore {
    /// True when the patch was not seen before.
    pub fn insert(&self, patch: &Patch) -> bool {
        self.seen.lock().expect("patch store poisoned").insert(patch.normalized())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub repo: String,
    pub commit: String,
    pub function_ref: String,
    pub attempts: u32,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FirstAccepted {
    pub trajectory: Trajectory,
    pub patch: Patch,
    pub bug: BugEntry,
    pub attempts: u32,
}

#[derive(Debug, Clone)]
pub enum FirstOutcome {
    Accepted(Box<FirstAccepted>),
    Rejected(Rejection),
}

/// Stable id suffix for everything derived from one (codebase, function).
pub fn task_key(codebase: &CodebaseRef, func: &FunctionRef) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(format!("{}\0{}\0{}", codebase.repo_name, codebase.commit, func.key()).as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

fn metadata(env: &RolloutEnv<'_>, codebase: &CodebaseRef) -> Metadata {
    Metadata {
        repo: codebase.repo_name.clone(),
        commit: codebase.commit.clone(),
        teacher_id: env.config.model_id.clone(),
        ..Metadata::default()
    }
}

/// Up to three attempts, each with a freshly sampled bug prompt. An
/// attempt fails on an empty or unparseable patch or when the teacher's
/// self-evaluation says no.
pub fn first_rollout<R: Rng + ?Sized>(
    env: &RolloutEnv<'_>,
    codebase: &CodebaseRef,
    catalog: &BugPromptCatalog,
    func: &FunctionRef,
    rng: &mut R,
    store: Option<&PatchStore>,
) -> Result<FirstOutcome, OrchestrateError> {
    let key = task_key(codebase, func);
    let mut reasons = Vec::new();
    let mut tried = Vec::new();
    for attempt in 1..=MAX_ATTEMPTS {
        let bug = catalog.sample_excluding(rng, &tried).clone();
        tried.push(bug.id);
        let task = render_first_prompt(&env.prompts.first_template, func, &bug);
        let mut sandbox = Sandbox::new(&codebase.root, env.shell.clone())?;
        let run = run_agent(env, &mut sandbox, &task)?;
        if run.patch.trim().is_empty() {
            reasons.push(format!("attempt {attempt}: no change (exit {})", run.exit.as_str()));
            continue;
        }
        let patch = match parse_unified_diff(&run.patch) {
            Ok(p) if !p.is_empty() => p,
            Ok(_) => {
                reasons.push(format!("attempt {attempt}: patch has no line changes"));
                continue;
            }
            Err(e) => {
                reasons.push(format!("attempt {attempt}: unparseable patch: {e}"));
                continue;
            }
        };
        let verdict = env.ask(render_template(
            &env.prompts.self_eval,
            &[("task", &task), ("patch", &run.patch)],
        ))?;
        let first_line = verdict.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        if !first_line.trim_start().to_ascii_uppercase().starts_with("YES") {
            reasons.push(format!("attempt {attempt}: self-evaluation rejected the change"));
            continue;
        }
        if let Some(store) = store {
            if !store.insert(&patch) {
                reasons.push(format!("attempt {attempt}: duplicate patch"));
                return Ok(FirstOutcome::Rejected(Rejection {
                    id: format!("rej-{key}"),
                    repo: codebase.repo_name.clone(),
                    commit: codebase.commit.clone(),
                    function_ref: func.key(),
                    attempts: attempt,
                    reasons,
                }));
            }
        }
        let mut t = Trajectory::new(format!("t1-{key}"), RolloutStage::First, Metadata {
            function_ref: Some(func.key()),
            bug_prompt_id: Some(bug.id),
            exit_reason: Some(run.exit.as_str().into()),
            ..metadata(env, codebase)
        });
        t.steps = run.steps;
        t.patch = Some(run.patch);
        return Ok(FirstOutcome::Accepted(Box::new(FirstAccepted {
            trajectory: t,
            patch,
            bug,
            attempts: attempt,
        })));
    }
    Ok(FirstOutcome::Rejected(Rejection {
        id: format!("rej-{key}"),
        repo: codebase.repo_name.clone(),
        commit: codebase.commit.clone(),
        function_ref: func.key(),
        attempts: MAX_ATTEMPTS,
        reasons,
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticPr {
    pub id: String,
    pub title: String,
    pub body: String,
    pub source_trajectory_id: String,
    pub demonstration_id: String,
}

impl SyntheticPr {
    /// The text handed to the second rollout.
    pub fn text(&self) -> String {
        if self.title.is_empty() {
            self.body.clone()
        } else {
            format!("{}\n\n{}", self.title, self.body)
        }
    }
}

/// Plain-text rendering of a trajectory (system prompt omitted).
pub fn render_transcript(t: &Trajectory) -> String {
    let mut out = String::new();
    for s in t.steps.iter().filter(|s| s.role != Role::System) {
        match s.role {
            Role::User => out.push_str(&format!("[user]\n{}\n", s.content)),
            Role::Assistant => {
                out.push_str("[assistant]\n");
                if let Some(r) = &s.reasoning {
                    out.push_str(&format!("{r}\n"));
                }
                if !s.content.is_empty() {
                    out.push_str(&format!("{}\n", s.content));
                }
                for c in &s.tool_calls {
                    out.push_str(&format!("<tool_call> {}\n", c.serialized()));
                }
            }
            Role::Tool => out.push_str(&format!("[tool]\n{}\n", s.tool_result.as_deref().unwrap_or(""))),
            Role::System => {}
        }
    }
    out
}

fn split_pr(text: &str) -> (String, String) {
    let trimmed = text.trim();
    let (first, rest) = trimmed.split_once('\n').unwrap_or((trimmed, ""));
    let title = first
        .trim()
        .strip_prefix("Title:")
        .map(|t| t.trim().to_string());
    match title {
        Some(t) if !rest.trim().is_empty() => (t, rest.trim().to_string()),
        Some(t) => (t.clone(), t),
        None => {
            let heading = first.trim().trim_start_matches('#').trim().to_string();
            if rest.trim().is_empty() {
                (heading, trimmed.to_string())
            } else {
                (heading, rest.trim().to_string())
            }
        }
    }
}

/// One completion turning the first rollout into a PR-style description
/// in the demonstration's format.
pub fn make_synthetic_pr(
    env: &RolloutEnv<'_>,
    t1: &Trajectory,
    demo: &Demonstration,
) -> Result<SyntheticPr, OrchestrateError> {
    let patch = t1
        .patch
        .as_deref()
        .filter(|p| !p.trim().is_empty())
        .ok_or_else(|| OrchestrateError::Generation(format!("{} has no patch", t1.id)))?;
    let demonstration = format!("Title: {}\n\n{}", demo.title, demo.body);
    let transcript = render_transcript(t1);
    let reply = env.ask(render_template(
        &env.prompts.pr_writer,
        &[("demonstration", &demonstration), ("transcript", &transcript), ("patch", patch)],
    ))?;
    if reply.trim().is_empty() {
        return Err(OrchestrateError::Generation(format!("empty PR completion for {}", t1.id)));
    }
    let (title, body) = split_pr(&reply);
    let suffix = t1.id.strip_prefix("t1-").unwrap_or(&t1.id);
    Ok(SyntheticPr {
        id: format!("pr-{suffix}"),
        title,
        body,
        source_trajectory_id: t1.id.clone(),
        demonstration_id: demo.id.clone(),
    })
}

/// Fresh sandbox, PR text as the only input.
pub fn second_rollout(
    env: &RolloutEnv<'_>,
    codebase: &CodebaseRef,
    pr: &SyntheticPr,
) -> Result<Trajectory, OrchestrateError> {
    let task = render_template(&env.prompts.second_template, &[("pr", &pr.text())]);
    let mut sandbox = Sandbox::new(&codebase.root, env.shell.clone())?;
    let run = run_agent(env, &mut sandbox, &task)?;
    let suffix = pr.id.strip_prefix("pr-").unwrap_or(&pr.id);
    let mut t = Trajectory::new(format!("t2-{suffix}"), RolloutStage::Second, Metadata {
        synthetic_pr_id: Some(pr.id.clone()),
        parent_id: Some(pr.source_trajectory_id.clone()),
        exit_reason: Some(run.exit.as_str().into()),
        ..metadata(env, codebase)
    });
    t.steps = run.steps;
    t.patch = Some(run.patch);
    Ok(t)
}
