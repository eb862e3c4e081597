//! The two-rollout generation loop.
//!
//! A first rollout breaks (or otherwise changes) code downstream of a
//! chosen function, the teacher then writes a pull-request description of
//! that change, and a second rollout sees only the description and tries
//! to reproduce the patch. Recall of the second patch against the first
//! is the soft-verification score.
//!
//! Everything talks to the model through [`ChatEndpoint`]; [`MockTeacher`]
//! is a deterministic stand-in for tests and dry runs.

pub mod agent;
pub mod campaign;
pub mod catalog;
pub mod endpoint;
pub mod functions;
pub mod mock;
pub mod sandbox;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::JsonlError;
use crate::verification::VerifyError;

pub use agent::{
    first_rollout, make_synthetic_pr, run_agent, second_rollout, AgentRun, ExitReason, FirstAccepted, FirstOutcome, PatchStore,
    Prompts, Rejection, RolloutEnv, SyntheticPr,
};
pub use campaign::{pair_and_verify, run_svg, CampaignConfig, CampaignSummary, Failure};
pub use catalog::{render_first_prompt, BugEntry, BugPromptCatalog, Demonstration, DemonstrationPool};
pub use endpoint::{ChatEndpoint, EndpointConfig, EndpointError, HttpEndpoint, RetryPolicy};
pub use functions::{enumerate_functions, FunctionRef};
pub use mock::{MockTeacher, SecondMode};
pub use sandbox::{Sandbox, ShellPolicy};

#[derive(Debug, Error)]
pub enum OrchestrateError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("generation failed: {0}")]
    Generation(String),
}

impl OrchestrateError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        OrchestrateError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// A codebase snapshot: a checked-out tree at a known commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodebaseRef {
    pub root: PathBuf,
    pub commit: String,
    pub repo_name: String,
}

impl CodebaseRef {
    pub fn check(&self) -> Result<(), OrchestrateError> {
        std::fs::read_dir(&self.root).map_err(|e| OrchestrateError::io(&self.root, e))?;
        Ok(())
    }
}
