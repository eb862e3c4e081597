use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::json;
use softverify::curation::{
    self, dedup_by_patch, filter_patch_lines, filter_tool_output, order_by_truncation_ratio, partition_fixed,
    select_ordered_truncated, select_random_truncated, DatasetSpec, MixShare, Source, DEFAULT_CONTEXT_LIMIT,
    DEFAULT_MAX_MEAN_TOOL_TOKENS, DEFAULT_MAX_PATCH_LINES, DEFAULT_MIN_RATIO,
};
use softverify::jsonl::{read_jsonl, write_jsonl};
use softverify::trajectory::strip_reasoning;
use softverify::{ByteQuarterCounter, Trajectory, VerificationRecord};

use super::{check_unit, ensure_dir, read_json};
use crate::output::table;
use crate::{CliError, CurateArgs, Outcome};

pub const CURATED: &str = "curated.jsonl";
pub const REPORT: &str = "curation.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Highest truncation ratio first, stopping below `min_ratio`.
    #[default]
    Ordered,
    /// Seeded random slices, the baseline.
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurateConfig {
    pub threshold: Option<f64>,
    pub max_patch_lines: usize,
    pub max_tool_tokens: f64,
    pub context_limit: usize,
    pub min_ratio: f64,
    /// Records kept per source; unbounded when absent.
    pub target: Option<usize>,
    pub selection: Selection,
    pub partition_size: Option<usize>,
    /// Mixture over inputs, labelled by file stem.
    pub mix: Option<MixConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixConfig {
    pub shares: Vec<MixShare>,
    pub target_size: usize,
}

impl Default for CurateConfig {
    fn default() -> Self {
        Self {
            threshold: None,
            max_patch_lines: DEFAULT_MAX_PATCH_LINES,
            max_tool_tokens: DEFAULT_MAX_MEAN_TOOL_TOKENS,
            context_limit: DEFAULT_CONTEXT_LIMIT,
            min_ratio: DEFAULT_MIN_RATIO,
            target: None,
            selection: Selection::Ordered,
            partition_size: None,
            mix: None,
        }
    }
}

impl CurateConfig {
    fn apply(&mut self, a: &CurateArgs) {
        if a.threshold.is_some() {
            self.threshold = a.threshold;
        }
        if let Some(v) = a.max_patch_lines {
            self.max_patch_lines = v;
        }
        if let Some(v) = a.max_tool_tokens {
            self.max_tool_tokens = v;
        }
        if let Some(v) = a.context_limit {
            self.context_limit = v;
        }
        if let Some(v) = a.min_ratio {
            self.min_ratio = v;
        }
        if a.target.is_some() {
            self.target = a.target;
        }
        if let Some(v) = a.selection {
            self.selection = v;
        }
        if a.partition_size.is_some() {
            self.partition_size = a.partition_size;
        }
    }
}

#[derive(Debug, Default, Serialize)]
struct StageCounts {
    source: String,
    input: usize,
    after_threshold: usize,
    after_patch_lines: usize,
    after_tool_output: usize,
    after_dedup: usize,
    selected: usize,
}

fn label_of(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn curate_source(
    label: String,
    records: Vec<Trajectory>,
    keep: Option<&HashSet<String>>,
    cfg: &CurateConfig,
    seed: u64,
) -> Result<(Vec<Trajectory>, StageCounts), CliError> {
    let counter = ByteQuarterCounter;
    let mut counts = StageCounts {
        source: label,
        input: records.len(),
        ..StageCounts::default()
    };
    let records: Vec<Trajectory> = match keep {
        Some(ids) => records.into_iter().filter(|t| ids.contains(&t.id)).collect(),
        None => records,
    };
    counts.after_threshold = records.len();
    let records = filter_patch_lines(records, cfg.max_patch_lines);
    counts.after_patch_lines = records.len();
    let records = filter_tool_output(records, cfg.max_tool_tokens, &counter);
    counts.after_tool_output = records.len();
    let records = dedup_by_patch(records);
    counts.after_dedup = records.len();
    let target = cfg.target.unwrap_or(usize::MAX);
    let selected = match cfg.selection {
        Selection::Ordered => select_ordered_truncated(records, cfg.context_limit, &counter, cfg.min_ratio, target)?,
        Selection::Random => select_random_truncated(records, cfg.context_limit, &counter, target, seed),
    };
    counts.selected = selected.len();
    Ok((selected.iter().map(strip_reasoning).collect(), counts))
}

fn partitions_report(records: &[Trajectory], cfg: &CurateConfig) -> Option<serde_json::Value> {
    let size = cfg.partition_size?;
    let ranked = order_by_truncation_ratio(records.to_vec(), cfg.context_limit, &ByteQuarterCounter);
    let parts = partition_fixed(ranked, size);
    Some(json!(parts
        .iter()
        .enumerate()
        .map(|(i, p)| json!({
            "index": i,
            "size": p.len(),
            "max_ratio": p.first().map(|r| r.ratio),
            "min_ratio": p.last().map(|r| r.ratio),
        }))
        .collect::<Vec<_>>()))
}

pub fn run(a: &CurateArgs) -> Result<Outcome, CliError> {
    let mut cfg: CurateConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => CurateConfig::default(),
    };
    cfg.apply(a);
    if let Some(t) = cfg.threshold {
        check_unit("threshold", t)?;
    }
    if cfg.partition_size == Some(0) {
        return Err(CliError::input("partition size must be positive"));
    }

    let mut inputs: Vec<PathBuf> = Vec::new();
    let keep = match (cfg.threshold, &a.verification) {
        (Some(t), Some(path)) => {
            let recs: Vec<VerificationRecord> = read_jsonl(path)?;
            inputs.push(path.clone());
            Some(recs.into_iter().filter(|r| r.r >= t).map(|r| r.trajectory_id).collect::<HashSet<_>>())
        }
        (Some(_), None) => return Err(CliError::new("usage", "a threshold needs --verification records")),
        _ => None,
    };

    let mut sources = Vec::new();
    let mut stages = Vec::new();
    for path in &a.input {
        let records: Vec<Trajectory> = read_jsonl(path)?;
        inputs.push(path.clone());
        let (kept, counts) = curate_source(label_of(path), records, keep.as_ref(), &cfg, a.seed)?;
        stages.push(counts);
        sources.push(Source {
            label: label_of(path),
            records: kept,
        });
    }

    let curated = match &cfg.mix {
        Some(m) => curation::mix(&DatasetSpec {
            sources,
            mix: m.shares.clone(),
            target_size: m.target_size,
            seed: a.seed,
        })?,
        None => sources.into_iter().flat_map(|s| s.records).collect(),
    };

    ensure_dir(&a.out)?;
    let out_path = a.out.join(CURATED);
    write_jsonl(&out_path, &curated)?;
    let report = json!({
        "config": cfg,
        "seed": a.seed,
        "stages": stages,
        "curated": curated.len(),
        "partitions": partitions_report(&curated, &cfg),
    });
    let report_path = a.out.join(REPORT);
    super::write_json(&report_path, &report)?;

    let rows: Vec<Vec<String>> = stages
        .iter()
        .map(|s| {
            [s.input, s.after_threshold, s.after_patch_lines, s.after_tool_output, s.after_dedup, s.selected]
                .iter()
                .map(ToString::to_string)
                .fold(vec![s.source.clone()], |mut v, c| {
                    v.push(c);
                    v
                })
        })
        .collect();
    let header = ["source", "input", "threshold", "patch_lines", "tool_output", "dedup", "selected"];
    let mut text = table(&header, &rows);
    text.push_str(&format!("curated {} -> {}\n", curated.len(), out_path.display()));
    Ok(Outcome {
        report,
        table: text,
        csv_header: header.iter().map(|s| s.to_string()).collect(),
        csv_rows: rows,
        config: a.config.clone(),
        seed: Some(a.seed),
        inputs,
        outputs: vec![out_path, report_path],
    })
}
