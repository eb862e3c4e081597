//! Campaign driver: every function of every codebase through the full
//! pipeline, persisted as JSONL shards with a resumable checkpoint.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! first_rollouts.jsonl   second_rollouts.jsonl   synthetic_prs.jsonl
//! verification.jsonl     rejections.jsonl        failures.jsonl
//! checkpoint.json        campaign.json
//! ```
//!
//! Workers only compute; the calling thread is the single writer for all
//! shards. After the pool drains, shards are de-duplicated by id, patch
//! duplicates are turned into rejections, and every shard is rewritten in
//! id order, so the result does not depend on the worker count.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::jsonl::{append_jsonl, read_jsonl, write_jsonl};
use crate::patchdiff::{parse_unified_diff, IdentityMode};
use crate::trajectory::Trajectory;
use crate::verification::{verify_pair, Bucket, VerificationRecord};

use super::agent::{
    first_rollout, make_synthetic_pr, second_rollout, task_key, FirstOutcome, Prompts, Rejection, RolloutEnv,
    SyntheticPr,
};
use super::catalog::{BugPromptCatalog, DemonstrationPool};
use super::endpoint::{ChatEndpoint, EndpointConfig};
use super::functions::{enumerate_functions, FunctionRef};
use super::sandbox::ShellPolicy;
use super::{CodebaseRef, OrchestrateError};

pub const FIRST_SHARD: &str = "first_rollouts.jsonl";
pub const SECOND_SHARD: &str = "second_rollouts.jsonl";
pub const PR_SHARD: &str = "synthetic_prs.jsonl";
pub const VERIFICATION_SHARD: &str = "verification.jsonl";
pub const REJECTION_SHARD: &str = "rejections.jsonl";
pub const FAILURE_SHARD: &str = "failures.jsonl";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const MANIFEST: &str = "campaign.json";

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub endpoint: EndpointConfig,
    pub codebases: Vec<CodebaseRef>,
    /// Defaults to the bundled placeholder catalog.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demonstrations_path: Option<PathBuf>,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub shell: ShellPolicy,
    #[serde(default)]
    pub prompts: Prompts,
    #[serde(default)]
    pub identity_mode: IdentityMode,
    /// Process at most this many functions per codebase (in scan order).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_functions_per_codebase: Option<usize>,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), OrchestrateError> {
        self.endpoint.validate().map_err(OrchestrateError::Config)?;
        if self.workers == 0 {
            return Err(OrchestrateError::Config("workers must be at least 1".into()));
        }
        if self.codebases.is_empty() {
            return Err(OrchestrateError::Config("no codebases configured".into()));
        }
        for c in &self.codebases {
            c.check()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub model_id: String,
    pub seed: u64,
    pub functions_total: usize,
    pub completed: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub failed: usize,
    /// rejected / (accepted + rejected); 0 when nothing finished.
    pub rejection_rate: f64,
    pub buckets: BTreeMap<String, usize>,
    pub mean_recall: Option<f64>,
    /// Shard file name → record count.
    pub shards: BTreeMap<String, usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Checkpoint {
    completed: BTreeSet<String>,
}

enum TaskResult {
    Done {
        first: Box<Trajectory>,
        pr: SyntheticPr,
        second: Box<Trajectory>,
        verification: VerificationRecord,
    },
    Rejected(Rejection),
    Failed(Failure),
}

struct Task {
    id: String,
    codebase: usize,
    func: FunctionRef,
}

fn task_id(c: &CodebaseRef, f: &FunctionRef) -> String {
    format!("{}@{}::{}", c.repo_name, c.commit, f.key())
}

/// Per-function RNG: the same function always sees the same draws.
fn task_rng(seed: u64, c: &CodebaseRef, f: &FunctionRef) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(task_id(c, f).as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), OrchestrateError> {
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(&tmp, text).map_err(|e| OrchestrateError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| OrchestrateError::io(path, e))
}

fn read_shard<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, OrchestrateError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(read_jsonl(path)?)
}

fn run_task(
    env: &RolloutEnv<'_>,
    config: &CampaignConfig,
    catalog: &BugPromptCatalog,
    demos: &DemonstrationPool,
    task: &Task,
) -> TaskResult {
    let codebase = &config.codebases[task.codebase];
    let mut rng = task_rng(config.seed, codebase, &task.func);
    let mut attempt = || -> Result<TaskResult, OrchestrateError> {
        let accepted = match first_rollout(env, codebase, catalog, &task.func, &mut rng, None)? {
            FirstOutcome::Rejected(r) => return Ok(TaskResult::Rejected(r)),
            FirstOutcome::Accepted(a) => a,
        };
        let demo = demos.sample(&mut rng);
        let pr = make_synthetic_pr(env, &accepted.trajectory, demo)?;
        let second = second_rollout(env, codebase, &pr)?;
        let verification = verify_pair(&accepted.trajectory, &second, config.identity_mode)?;
        Ok(TaskResult::Done {
            first: Box::new(accepted.trajectory),
            pr,
            second: Box::new(second),
            verification,
        })
    };
    match attempt() {
        Ok(r) => r,
        Err(e) => {
            tracing::error!(task = %task.id, error = %e, "function failed; continuing");
            TaskResult::Failed(Failure {
                id: task.id.clone(),
                error: e.to_string(),
            })
        }
    }
}

/// Runs (or resumes) a campaign into `out_dir`.
pub fn run_svg(
    config: &CampaignConfig,
    endpoint: &dyn ChatEndpoint,
    out_dir: &Path,
) -> Result<CampaignSummary, OrchestrateError> {
    config.validate()?;
    let catalog = match &config.catalog_path {
        Some(p) => BugPromptCatalog::load(p)?,
        None => BugPromptCatalog::bundled(),
    };
    let demos = match &config.demonstrations_path {
        Some(p) => DemonstrationPool::load(p)?,
        None => DemonstrationPool::bundled(),
    };
    fs::create_dir_all(out_dir).map_err(|e| OrchestrateError::io(out_dir, e))?;

    let mut tasks = Vec::new();
    for (i, c) in config.codebases.iter().enumerate() {
        let funcs = enumerate_functions(&c.root)?;
        let limit = config.max_functions_per_codebase.unwrap_or(usize::MAX);
        tasks.extend(funcs.into_iter().take(limit).map(|func| Task {
            id: task_id(c, &func),
            codebase: i,
            func,
        }));
    }
    let functions_total = tasks.len();

    let checkpoint_path = out_dir.join(CHECKPOINT);
    let mut checkpoint: Checkpoint = match fs::read_to_string(&checkpoint_path) {
        Ok(text) => serde_json::from_str(&text)
            .map_err(|e| OrchestrateError::Config(format!("corrupt checkpoint {}: {e}", checkpoint_path.display())))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Checkpoint::default(),
        Err(e) => return Err(OrchestrateError::io(&checkpoint_path, e)),
    };
    let pending: Vec<Task> = tasks.into_iter().filter(|t| !checkpoint.completed.contains(&t.id)).collect();
    tracing::info!(total = functions_total, pending = pending.len(), "starting campaign");

    let env = RolloutEnv {
        endpoint,
        config: &config.endpoint,
        prompts: &config.prompts,
        shell: &config.shell,
    };
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(String, TaskResult)>();
    let workers = config.workers.min(pending.len().max(1));
    let shard = |name: &str| out_dir.join(name);

    thread::scope(|s| -> Result<(), OrchestrateError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (env, pending, next, catalog, demos) = (&env, &pending, &next, &catalog, &demos);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = pending.get(i) else { break };
                let result = run_task(env, config, catalog, demos, task);
                if tx.send((task.id.clone(), result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (id, result) in rx {
            let finished = match result {
                TaskResult::Done {
                    first,
                    pr,
                    second,
                    verification,
                } => {
                    append_jsonl(&shard(FIRST_SHARD), [first.as_ref()])?;
                    append_jsonl(&shard(PR_SHARD), [&pr])?;
                    append_jsonl(&shard(SECOND_SHARD), [second.as_ref()])?;
                    append_jsonl(&shard(VERIFICATION_SHARD), [&verification])?;
                    true
                }
                TaskResult::Rejected(r) => {
                    append_jsonl(&shard(REJECTION_SHARD), [&r])?;
                    true
                }
                TaskResult::Failed(f) => {
                    append_jsonl(&shard(FAILURE_SHARD), [&f])?;
                    false
                }
            };
            if finished {
                checkpoint.completed.insert(id);
                write_json_atomic(&checkpoint_path, &checkpoint)?;
            }
        }
        Ok(())
    })?;

    let summary = finalize(out_dir, config, functions_total, &checkpoint)?;
    write_json_atomic(&out_dir.join(MANIFEST), &summary)?;
    Ok(summary)
}

fn dedup_sorted<T>(mut records: Vec<T>, id: impl Fn(&T) -> &str) -> Vec<T> {
    let mut seen = BTreeSet::new();
    records.retain(|r| seen.insert(id(r).to_string()));
    records.sort_by(|a, b| id(a).cmp(id(b)));
    records
}

fn finalize(
    out_dir: &Path,
    config: &CampaignConfig,
    functions_total: usize,
    checkpoint: &Checkpoint,
) -> Result<CampaignSummary, OrchestrateError> {
    let path = |n: &str| out_dir.join(n);
    let mut firsts = dedup_sorted(read_shard::<Trajectory>(&path(FIRST_SHARD))?, |t| &t.id);
    let mut prs = dedup_sorted(read_shard::<SyntheticPr>(&path(PR_SHARD))?, |p| &p.id);
    let mut seconds = dedup_sorted(read_shard::<Trajectory>(&path(SECOND_SHARD))?, |t| &t.id);
    let mut verifs = dedup_sorted(read_shard::<VerificationRecord>(&path(VERIFICATION_SHARD))?, |v| &v.trajectory_id);
    let mut rejections = dedup_sorted(read_shard::<Rejection>(&path(REJECTION_SHARD))?, |r| &r.id);

    // Identical first-rollout patches: keep the lowest id, reject the rest.
    let mut owner: HashMap<_, String> = HashMap::new();
    let mut dropped = BTreeSet::new();
    for t in &firsts {
        let Some(Ok(patch)) = t.patch.as_deref().map(parse_unified_diff) else { continue };
        let norm = patch.normalized();
        match owner.get(&norm) {
            Some(keeper) => {
                dropped.insert(t.id.clone());
                rejections.push(Rejection {
                    id: format!("rej-{}", t.id.trim_start_matches("t1-")),
                    repo: t.metadata.repo.clone(),
                    commit: t.metadata.commit.clone(),
                    function_ref: t.metadata.function_ref.clone().unwrap_or_default(),
                    attempts: 1,
                    reasons: vec![format!("duplicate patch of {keeper}")],
                });
            }
            None => {
                owner.insert(norm, t.id.clone());
            }
        }
    }
    if !dropped.is_empty() {
        firsts.retain(|t| !dropped.contains(&t.id));
        prs.retain(|p| !dropped.contains(&p.source_trajectory_id));
        let dropped_seconds: BTreeSet<String> = seconds
            .iter()
            .filter(|t| t.metadata.parent_id.as_ref().is_some_and(|p| dropped.contains(p)))
            .map(|t| t.id.clone())
            .collect();
        seconds.retain(|t| !dropped_seconds.contains(&t.id));
        verifs.retain(|v| !dropped_seconds.contains(&v.trajectory_id));
        rejections = dedup_sorted(rejections, |r| &r.id);
    }

    // Failures that later succeeded (after a resume) are no longer failures.
    let failures: Vec<Failure> = dedup_sorted(read_shard::<Failure>(&path(FAILURE_SHARD))?, |f| &f.id)
        .into_iter()
        .filter(|f| !checkpoint.completed.contains(&f.id))
        .collect();

    let mut shards = BTreeMap::new();
    let mut rewrite = |name: &str, n: usize, res: Result<(), crate::jsonl::JsonlError>| -> Result<(), OrchestrateError> {
        res?;
        shards.insert(name.to_string(), n);
        Ok(())
    };
    rewrite(FIRST_SHARD, firsts.len(), write_jsonl(&path(FIRST_SHARD), &firsts))?;
    rewrite(PR_SHARD, prs.len(), write_jsonl(&path(PR_SHARD), &prs))?;
    rewrite(SECOND_SHARD, seconds.len(), write_jsonl(&path(SECOND_SHARD), &seconds))?;
    rewrite(VERIFICATION_SHARD, verifs.len(), write_jsonl(&path(VERIFICATION_SHARD), &verifs))?;
    rewrite(REJECTION_SHARD, rejections.len(), write_jsonl(&path(REJECTION_SHARD), &rejections))?;
    rewrite(FAILURE_SHARD, failures.len(), write_jsonl(&path(FAILURE_SHARD), &failures))?;

    let mut buckets: BTreeMap<String, usize> = ["hard", "soft", "unverified"].iter().map(|b| (b.to_string(), 0)).collect();
    for v in &verifs {
        let key = match v.bucket {
            Bucket::Hard => "hard",
            Bucket::Soft => "soft",
            Bucket::Unverified => "unverified",
        };
        *buckets.get_mut(key).expect("bucket key") += 1;
    }
    let finished = firsts.len() + rejections.len();
    Ok(CampaignSummary {
        model_id: config.endpoint.model_id.clone(),
        seed: config.seed,
        functions_total,
        completed: checkpoint.completed.len(),
        accepted: firsts.len(),
        rejected: rejections.len(),
        failed: failures.len(),
        rejection_rate: if finished == 0 {
            0.0
        } else {
            rejections.len() as f64 / finished as f64
        },
        buckets,
        mean_recall: (!verifs.is_empty()).then(|| verifs.iter().map(|v| v.r).sum::<f64>() / verifs.len() as f64),
        shards,
    })
}

/// Recomputes verification for a pair of shards, matching each second
/// rollout to its parent first rollout. Second rollouts whose parent is
/// missing are reported by id.
pub fn pair_and_verify(
    firsts: &[Trajectory],
    seconds: &[Trajectory],
    mode: IdentityMode,
) -> Result<(Vec<VerificationRecord>, Vec<String>), OrchestrateError> {
    let by_id: HashMap<&str, &Trajectory> = firsts.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut records = Vec::new();
    let mut orphans = Vec::new();
    for t2 in seconds {
        match t2.metadata.parent_id.as_deref().and_then(|p| by_id.get(p)) {
            Some(t1) => records.push(verify_pair(t1, t2, mode)?),
            None => orphans.push(t2.id.clone()),
        }
    }
    records.sort_by(|a, b| a.trajectory_id.cmp(&b.trajectory_id));
    Ok((records, orphans))
}

/// The id suffix shared by every record of one (codebase, function).
pub fn record_key(codebase: &CodebaseRef, func: &FunctionRef) -> String {
    task_key(codebase, func)
}
