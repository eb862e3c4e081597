use serde_json::{json, Value};
use softverify::orchestrate::campaign::{
    CHECKPOINT, FAILURE_SHARD, FIRST_SHARD, MANIFEST, PR_SHARD, REJECTION_SHARD, SECOND_SHARD, VERIFICATION_SHARD,
};
use softverify::orchestrate::{run_svg, CampaignConfig, HttpEndpoint, MockTeacher, SecondMode};

use super::{config_dir, ensure_dir, read_json, resolve};
use crate::output::table;
use crate::{CliError, GenerateArgs, Outcome};

/// Endpoint base URLs starting with this run against the built-in mock
/// teacher: `mock:` (replay), `mock:half`, `mock:disjoint`, `mock:mixed`.
pub const MOCK_PREFIX: &str = "mock:";

fn mock_mode(spec: &str) -> Result<SecondMode, CliError> {
    Ok(match spec {
        "" | "replay" => SecondMode::Replay,
        "half" => SecondMode::Half,
        "disjoint" => SecondMode::Disjoint,
        "mixed" => SecondMode::Mixed,
        other => return Err(CliError::input(format!("unknown mock mode {other:?}"))),
    })
}

pub fn run(a: &GenerateArgs) -> Result<Outcome, CliError> {
    let mut raw: Value = read_json(&a.config)?;
    let obj = raw
        .as_object_mut()
        .ok_or_else(|| CliError::input("campaign config must be a JSON object"))?;
    obj.insert("seed".into(), json!(a.seed));
    if let Some(w) = a.workers {
        obj.insert("workers".into(), json!(w));
    }
    let mut cfg: CampaignConfig =
        serde_json::from_value(raw).map_err(|e| CliError::input(format!("{}: {e}", a.config.display())))?;
    let base = config_dir(&a.config);
    for c in &mut cfg.codebases {
        c.root = resolve(&base, &c.root);
    }
    let mut inputs = Vec::new();
    for p in [&mut cfg.catalog_path, &mut cfg.demonstrations_path].into_iter().flatten() {
        *p = resolve(&base, p);
        inputs.push(p.clone());
    }

    ensure_dir(&a.out)?;
    let summary = match cfg.endpoint.base_url.strip_prefix(MOCK_PREFIX) {
        Some(mode) => {
            let roots = cfg.codebases.iter().map(|c| c.root.clone()).collect();
            let mock = MockTeacher::new(roots).with_second_mode(mock_mode(mode)?);
            run_svg(&cfg, &mock, &a.out)?
        }
        None => {
            let endpoint = HttpEndpoint::new(cfg.endpoint.clone()).map_err(|e| CliError::new("endpoint", e.to_string()))?;
            run_svg(&cfg, &endpoint, &a.out)?
        }
    };

    let outputs = [FIRST_SHARD, PR_SHARD, SECOND_SHARD, VERIFICATION_SHARD, REJECTION_SHARD, FAILURE_SHARD, CHECKPOINT, MANIFEST]
        .iter()
        .map(|n| a.out.join(n))
        .filter(|p| p.exists())
        .collect();
    let mut rows = vec![
        vec!["functions".into(), summary.functions_total.to_string()],
        vec!["accepted".into(), summary.accepted.to_string()],
        vec!["rejected".into(), summary.rejected.to_string()],
        vec!["failed".into(), summary.failed.to_string()],
        vec!["rejection rate".into(), format!("{:.3}", summary.rejection_rate)],
    ];
    for (bucket, n) in &summary.buckets {
        rows.push(vec![format!("bucket {bucket}"), n.to_string()]);
    }
    if let Some(m) = summary.mean_recall {
        rows.push(vec!["mean recall".into(), format!("{m:.4}")]);
    }
    Ok(Outcome {
        report: serde_json::to_value(&summary)?,
        table: table(&["metric", "value"], &rows),
        csv_header: vec!["metric".into(), "value".into()],
        csv_rows: rows,
        config: Some(a.config.clone()),
        seed: Some(a.seed),
        inputs,
        outputs,
    })
}
