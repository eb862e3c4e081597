use std::collections::HashSet;

use serde_json::json;
use softverify::jsonl::{read_jsonl, write_jsonl};
use softverify::orchestrate::campaign::{FIRST_SHARD, SECOND_SHARD};
use softverify::orchestrate::pair_and_verify;
use softverify::verification::{bucket_by_thresholds, filter_at_least};
use softverify::{IdentityMode, Trajectory};

use super::{check_unit, ensure_dir};
use crate::output::table;
use crate::{CliError, Outcome, VerifyArgs};

pub const RECORDS: &str = "verification.jsonl";
pub const VERIFIED: &str = "verified.jsonl";

pub fn run(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let (first, second) = match (&a.input, &a.first, &a.second) {
        (Some(dir), None, None) => (dir.join(FIRST_SHARD), dir.join(SECOND_SHARD)),
        (None, Some(f), Some(s)) => (f.clone(), s.clone()),
        _ => return Err(CliError::new("usage", "give either --input DIR or both --first and --second")),
    };
    if let Some(t) = a.threshold {
        check_unit("--threshold", t)?;
    }
    let firsts: Vec<Trajectory> = read_jsonl(&first)?;
    let seconds: Vec<Trajectory> = read_jsonl(&second)?;
    let mode = if a.path_agnostic { IdentityMode::PathAgnostic } else { IdentityMode::WithPath };
    let (records, orphans) = pair_and_verify(&firsts, &seconds, mode)?;
    if !orphans.is_empty() {
        tracing::warn!(count = orphans.len(), "second rollouts without a matching first rollout");
    }
    let groups = bucket_by_thresholds(&records, &a.thresholds)?;

    ensure_dir(&a.out)?;
    let records_path = a.out.join(RECORDS);
    write_jsonl(&records_path, &records)?;
    let mut outputs = vec![records_path];

    let mut kept = None;
    if let Some(t) = a.threshold {
        let ids: HashSet<String> = filter_at_least(&records, t).into_iter().map(|r| r.trajectory_id).collect();
        let verified: Vec<&Trajectory> = seconds.iter().filter(|s| ids.contains(&s.id)).collect();
        let path = a.out.join(VERIFIED);
        write_jsonl(&path, verified.iter().copied())?;
        outputs.push(path);
        kept = Some(verified.len());
    }

    let total = records.len().max(1) as f64;
    let rows: Vec<Vec<String>> = groups
        .iter()
        .map(|g| {
            vec![
                g.label(),
                g.records.len().to_string(),
                format!("{:.3}", g.records.len() as f64 / total),
            ]
        })
        .collect();
    let mean = (!records.is_empty()).then(|| records.iter().map(|r| r.r).sum::<f64>() / records.len() as f64);
    let report = json!({
        "pairs": records.len(),
        "orphans": orphans,
        "mean_recall": mean,
        "groups": groups.iter().map(|g| json!({"label": g.label(), "lower": g.lower, "upper": g.upper, "count": g.records.len()})).collect::<Vec<_>>(),
        "threshold": a.threshold,
        "kept": kept,
    });
    let mut text = table(&["interval", "count", "share"], &rows);
    text.push_str(&format!("pairs {}  orphans {}", records.len(), orphans.len()));
    if let (Some(t), Some(k)) = (a.threshold, kept) {
        text.push_str(&format!("  kept {k} at r >= {t}"));
    }
    text.push('\n');
    Ok(Outcome {
        report,
        table: text,
        csv_header: vec!["interval".into(), "count".into(), "share".into()],
        csv_rows: rows,
        inputs: vec![first, second],
        outputs,
        ..Outcome::default()
    })
}
