//! Agent trajectories: token accounting, truncation ratio, whole-step
//! truncation and reasoning stripping.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("untrainable trajectory {id}: first step needs {needed} tokens, limit is {limit}")]
    Untrainable { id: String, needed: usize, limit: usize },
    #[error("invalid trajectory {id}: {reason}")]
    Invalid { id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutStage {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub arguments: Map<String, Value>,
}

impl ToolCall {
    /// Compact JSON form used for token accounting and transcripts.
    pub fn serialized(&self) -> String {
        serde_json::json!({ "name": self.name, "arguments": self.arguments }).to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
    #[serde(default)]
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_result: Option<String>,
}

impl Step {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            index: 0,
            role,
            reasoning: None,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_result: None,
        }
    }

    pub fn tool(result: impl Into<String>) -> Self {
        Self {
            tool_result: Some(result.into()),
            ..Self::new(Role::Tool, "")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationInfo {
    pub original_steps: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub repo: String,
    pub commit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bug_prompt_id: Option<u32>,
    pub teacher_id: String,
    /// Synthetic PR that seeded a second rollout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_pr_id: Option<String>,
    /// First-rollout trajectory a second rollout tries to reproduce.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub rollout_stage: RolloutStage,
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<String>,
    pub metadata: Metadata,
}

impl Trajectory {
    pub fn new(id: impl Into<String>, rollout_stage: RolloutStage, metadata: Metadata) -> Self {
        Self {
            id: id.into(),
            rollout_stage,
            steps: Vec::new(),
            patch: None,
            metadata,
        }
    }

    /// Appends a step, assigning its index.
    pub fn push(&mut self, mut step: Step) {
        step.index = self.steps.len();
        self.steps.push(step);
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let invalid = |reason: String| TrajectoryError::Invalid {
            id: self.id.clone(),
            reason,
        };
        if self.steps.is_empty() {
            return Err(invalid("no steps".into()));
        }
        for (i, step) in self.steps.iter().enumerate() {
            if step.index != i {
                return Err(invalid(format!("step {i} has index {}", step.index)));
            }
            if step.role != Role::Assistant && (step.reasoning.is_some() || !step.tool_calls.is_empty()) {
                return Err(invalid(format!("step {i}: reasoning/tool calls on a non-assistant step")));
            }
            if step.role != Role::Tool && step.tool_result.is_some() {
                return Err(invalid(format!("step {i}: tool result on a non-tool step")));
            }
        }
        if self.rollout_stage == RolloutStage::Second && self.metadata.synthetic_pr_id.is_none() {
            return Err(invalid("second rollout without synthetic PR id".into()));
        }
        Ok(())
    }
}

/// Text to token-count function.
pub trait TokenCounter: Send + Sync {
    fn name(&self) -> &str;
    fn count(&self, text: &str) -> usize;
}

/// ⌈UTF-8 bytes / 4⌉ per text field.
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteQuarterCounter;

impl TokenCounter for ByteQuarterCounter {
    fn name(&self) -> &str {
        "bytes/4"
    }

    fn count(&self, text: &str) -> usize {
        text.len().div_ceil(4)
    }
}

pub fn step_tokens(step: &Step, counter: &dyn TokenCounter) -> usize {
    let mut n = counter.count(&step.content);
    if let Some(r) = &step.reasoning {
        n += counter.count(r);
    }
    for call in &step.tool_calls {
        n += counter.count(&call.serialized());
    }
    if let Some(r) = &step.tool_result {
        n += counter.count(r);
    }
    n
}

pub fn trajectory_tokens(t: &Trajectory, counter: &dyn TokenCounter) -> usize {
    t.steps.iter().map(|s| step_tokens(s, counter)).sum()
}

/// Length of the longest step prefix whose cumulative tokens fit in `limit`.
pub fn fitting_prefix(t: &Trajectory, limit: usize, counter: &dyn TokenCounter) -> usize {
    let mut total = 0usize;
    for (i, step) in t.steps.iter().enumerate() {
        total = total.saturating_add(step_tokens(step, counter));
        if total > limit {
            return i;
        }
    }
    t.steps.len()
}

/// Fraction of steps inside the context limit.
pub fn truncation_ratio(t: &Trajectory, limit: usize, counter: &dyn TokenCounter) -> f64 {
    if t.steps.is_empty() {
        return 1.0;
    }
    fitting_prefix(t, limit, counter) as f64 / t.steps.len() as f64
}

pub fn truncate(
    t: &Trajectory,
    limit: usize,
    counter: &dyn TokenCounter,
) -> Result<Trajectory, TrajectoryError> {
    let k = fitting_prefix(t, limit, counter);
    if k == 0 && !t.steps.is_empty() {
        return Err(TrajectoryError::Untrainable {
            id: t.id.clone(),
            needed: step_tokens(&t.steps[0], counter),
            limit,
        });
    }
    let mut out = t.clone();
    if k == t.steps.len() {
        return Ok(out);
    }
    out.steps.truncate(k);
    out.metadata.truncation = Some(TruncationInfo {
        original_steps: t.steps.len(),
        ratio: k as f64 / t.steps.len() as f64,
    });
    Ok(out)
}

pub fn strip_reasoning(t: &Trajectory) -> Trajectory {
    let mut out = t.clone();
    for step in &mut out.steps {
        step.reasoning = None;
    }
    out
}

/// Mean token count over tool results; 0 when there are none.
pub fn mean_tool_output_tokens(t: &Trajectory, counter: &dyn TokenCounter) -> f64 {
    let counts: Vec<usize> = t
        .steps
        .iter()
        .filter_map(|s| s.tool_result.as_deref())
        .map(|r| counter.count(r))
        .collect();
    if counts.is_empty() {
        return 0.0;
    }
    counts.iter().sum::<usize>() as f64 / counts.len() as f64
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn meta() -> Metadata {
        Metadata {
            repo: "demo".into(),
            commit: "abc123".into(),
            teacher_id: "teacher".into(),
            ..Metadata::default()
        }
    }

    /// `n` user steps of `bytes` ASCII bytes each.
    pub fn uniform(id: &str, n: usize, bytes: usize) -> Trajectory {
        let mut t = Trajectory::new(id, RolloutStage::First, meta());
        for _ in 0..n {
            t.push(Step::new(Role::User, "x".repeat(bytes)));
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn assistant_with_call(reasoning: &str) -> Step {
        let mut args = Map::new();
        args.insert("path".into(), Value::String("/repo/a.py".into()));
        Step {
            reasoning: Some(reasoning.into()),
            tool_calls: vec![ToolCall {
                id: "c1".into(),
                name: "str_replace_editor".into(),
                arguments: args,
            }],
            ..Step::new(Role::Assistant, "looking")
        }
    }

    #[test]
    fn default_counter_rounds_up() {
        let c = ByteQuarterCounter;
        assert_eq!(c.count(""), 0);
        assert_eq!(c.count("a"), 1);
        assert_eq!(c.count("abcd"), 1);
        assert_eq!(c.count("abcde"), 2);
        // multi-byte characters count by bytes
        assert_eq!(c.count("é"), 1);
        assert_eq!(c.count("ééé"), 2);
    }

    #[test]
    fn token_examples() {
        let mut t = Trajectory::new("e", RolloutStage::First, meta());
        t.push(Step::new(Role::User, ""));
        assert_eq!(trajectory_tokens(&t, &ByteQuarterCounter), 0);
        assert_eq!(trajectory_tokens(&uniform("u", 2, 4096), &ByteQuarterCounter), 2048);
    }

    #[test]
    fn token_sum_matches_field_by_field_recount() {
        let mut t = Trajectory::new("f", RolloutStage::First, meta());
        t.push(Step::new(Role::System, "You are a helpful agent."));
        t.push(Step::new(Role::User, "There is a bug."));
        t.push(assistant_with_call("I should open the file first"));
        t.push(Step::tool("1\tdef f():\n2\t    return 1\n"));
        // Independent recount: ceil(len/4) for every text field.
        let q = |s: &str| (s.len() + 3) / 4;
        let call = r#"{"arguments":{"path":"/repo/a.py"},"name":"str_replace_editor"}"#;
        let expected = q("You are a helpful agent.")
            + q("There is a bug.")
            + q("looking")
            + q("I should open the file first")
            + q(call)
            + q("1\tdef f():\n2\t    return 1\n");
        assert_eq!(trajectory_tokens(&t, &ByteQuarterCounter), expected);
    }

    #[test]
    fn ratio_examples() {
        let t = uniform("r", 10, 400); // 100 tokens per step
        assert_eq!(truncation_ratio(&t, 1000, &ByteQuarterCounter), 1.0);
        assert_eq!(truncation_ratio(&t, 950, &ByteQuarterCounter), 0.9);
        assert_eq!(truncation_ratio(&t, 99, &ByteQuarterCounter), 0.0);
        assert_eq!(truncation_ratio(&t, usize::MAX, &ByteQuarterCounter), 1.0);
    }

    #[test]
    fn truncate_examples() {
        let t = uniform("r", 10, 400);
        let same = truncate(&t, 1000, &ByteQuarterCounter).unwrap();
        assert_eq!(same, t);
        let cut = truncate(&t, 950, &ByteQuarterCounter).unwrap();
        assert_eq!(cut.steps.len(), 9);
        assert_eq!(
            cut.metadata.truncation,
            Some(TruncationInfo { original_steps: 10, ratio: 0.9 })
        );
        assert!(matches!(
            truncate(&t, 50, &ByteQuarterCounter),
            Err(TrajectoryError::Untrainable { needed: 100, limit: 50, .. })
        ));
    }

    #[test]
    fn strip_examples() {
        let plain = uniform("p", 3, 10);
        assert_eq!(strip_reasoning(&plain), plain);
        let mut t = Trajectory::new("s", RolloutStage::First, meta());
        t.push(assistant_with_call("long thoughts"));
        let s = strip_reasoning(&t);
        assert_eq!(s.steps[0].reasoning, None);
        assert_eq!(s.steps[0].tool_calls, t.steps[0].tool_calls);
        assert_eq!(s.steps[0].content, "looking");
    }

    #[test]
    fn mean_tool_output_examples() {
        assert_eq!(mean_tool_output_tokens(&uniform("n", 2, 8), &ByteQuarterCounter), 0.0);
        let mut t = Trajectory::new("m", RolloutStage::First, meta());
        t.push(Step::tool("x".repeat(2000)));
        t.push(Step::new(Role::User, "ignored"));
        t.push(Step::tool("x".repeat(2800)));
        assert_eq!(mean_tool_output_tokens(&t, &ByteQuarterCounter), 600.0);
        // hand-computed: ceil(5/4)=2, ceil(9/4)=3, ceil(1/4)=1 -> 2.0
        let mut h = Trajectory::new("h", RolloutStage::First, meta());
        for r in ["12345", "123456789", "1"] {
            h.push(Step::tool(r));
        }
        assert_eq!(mean_tool_output_tokens(&h, &ByteQuarterCounter), 2.0);
    }

    #[test]
    fn validation_catches_role_violations() {
        let mut t = uniform("v", 2, 4);
        assert!(t.validate().is_ok());
        t.steps[1].tool_result = Some("x".into());
        assert!(t.validate().is_err());
        let mut second = uniform("w", 1, 4);
        second.rollout_stage = RolloutStage::Second;
        assert!(second.validate().is_err());
        second.metadata.synthetic_pr_id = Some("pr".into());
        assert!(second.validate().is_ok());
    }
}
