use serde::Deserialize;
use serde_json::json;
use softverify::stats::{
    confidence_tier, scaling_seed_rows, seeds_required, snr_from_summaries, summarize, PoolingFactor, SeedGroup,
    Summary,
};

use super::{ensure_dir, read_json, write_json};
use crate::output::table;
use crate::{CliError, Outcome, PoolingArg, StatsArgs};

pub const REPORT: &str = "stats.json";

/// Per-seed values, or a published summary when only those are known.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GroupInput {
    Values { label: String, values: Vec<f64> },
    Summary { label: String, mean: f64, std: f64, n: usize },
}

impl GroupInput {
    fn label(&self) -> &str {
        match self {
            GroupInput::Values { label, .. } | GroupInput::Summary { label, .. } => label,
        }
    }

    fn summary(&self) -> Result<Summary, CliError> {
        match self {
            GroupInput::Values { label, values } => Ok(summarize(&SeedGroup::new(label.clone(), values.clone()))?),
            GroupInput::Summary { mean, std, n, .. } => Ok(Summary { mean: *mean, std: *std, n: *n }),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatsInput {
    groups: Vec<GroupInput>,
    /// Label pairs to compare; defaults to consecutive groups.
    #[serde(default)]
    comparisons: Vec<(String, String)>,
}

/// The two summary rows compared in the headline table plus the scaling
/// study's per-seed rows.
fn default_input() -> StatsInput {
    let mut groups = vec![
        GroupInput::Summary { label: "SERA".into(), mean: 30.00, std: 1.41, n: 3 },
        GroupInput::Summary { label: "SWE-smith".into(), mean: 25.27, std: 0.61, n: 3 },
    ];
    groups.extend(scaling_seed_rows().into_iter().map(|(n, v)| GroupInput::Values {
        label: format!("{n} samples"),
        values: v.to_vec(),
    }));
    StatsInput {
        groups,
        comparisons: vec![("SERA".into(), "SWE-smith".into())],
    }
}

pub fn run(a: &StatsArgs) -> Result<Outcome, CliError> {
    let input = match &a.input {
        Some(p) => read_json::<StatsInput>(p)?,
        None => default_input(),
    };
    let factor = match a.pooling {
        PoolingArg::Literal => PoolingFactor::Literal,
        PoolingArg::TwoGroup => PoolingFactor::TwoGroup,
    };
    let mut summaries = Vec::new();
    for g in &input.groups {
        summaries.push((g.label().to_string(), g.summary()?));
    }
    let find = |label: &str| {
        summaries
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, s)| *s)
            .ok_or_else(|| CliError::input(format!("comparison names unknown group {label:?}")))
    };
    let pairs: Vec<(String, String)> = if input.comparisons.is_empty() {
        summaries.windows(2).map(|w| (w[0].0.clone(), w[1].0.clone())).collect()
    } else {
        input.comparisons.clone()
    };

    let mut comparisons = Vec::new();
    let mut rows = Vec::new();
    for (la, lb) in &pairs {
        let (sa, sb) = (find(la)?, find(lb)?);
        let snr = snr_from_summaries(&sa, &sb);
        let tier = confidence_tier(snr);
        let effect = (sa.mean - sb.mean).abs();
        let pooled = ((sa.std * sa.std + sb.std * sb.std) / 2.0).sqrt();
        let seeds = seeds_required(effect, pooled, factor).ok();
        rows.push(vec![
            format!("{la} vs {lb}"),
            format!("{effect:.2}"),
            format!("{snr:.3}"),
            serde_json::to_value(tier)?.as_str().unwrap_or_default().to_string(),
            seeds.map_or_else(|| "-".into(), |s| s.to_string()),
        ]);
        comparisons.push(json!({
            "a": la, "b": lb, "effect": effect, "pooled_std": pooled,
            "snr": snr, "tier": tier, "seeds_required": seeds,
        }));
    }
    let report = json!({
        "pooling": factor,
        "groups": summaries.iter().map(|(l, s)| json!({"label": l, "summary": s})).collect::<Vec<_>>(),
        "comparisons": comparisons,
    });

    let mut outputs = Vec::new();
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        let path = dir.join(REPORT);
        write_json(&path, &report)?;
        outputs.push(path);
    }
    let group_rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|(l, s)| vec![l.clone(), format!("{:.2}", s.mean), format!("{:.2}", s.std), s.n.to_string()])
        .collect();
    let header = ["comparison", "effect", "snr", "tier", "seeds"];
    let mut text = table(&["group", "mean", "std", "n"], &group_rows);
    text.push('\n');
    text.push_str(&table(&header, &rows));
    Ok(Outcome {
        report,
        table: text,
        csv_header: header.map(String::from).to_vec(),
        csv_rows: rows,
        inputs: a.input.iter().cloned().collect(),
        outputs,
        ..Outcome::default()
    })
}
