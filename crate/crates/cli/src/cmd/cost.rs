use serde::Deserialize;
use serde_json::json;
use softverify::costmodel::{campaign_cost, CostBreakdown, reference, render_table, trajectory_cost, PricingProfile, TokenUsageProfile};

use super::{ensure_dir, read_json, write_json};
use crate::output::table;
use crate::{CliError, CostArgs, Outcome};

pub const REPORT: &str = "cost.json";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Column {
    name: String,
    usage: TokenUsageProfile,
    pricing: PricingProfile,
    /// Published total to compare against, if any.
    #[serde(default)]
    expected: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostConfig {
    columns: Vec<Column>,
}

pub fn run(a: &CostArgs) -> Result<Outcome, CliError> {
    let columns: Vec<Column> = match &a.config {
        Some(p) => read_json::<CostConfig>(p)?.columns,
        None => reference::breakdown_columns()
            .into_iter()
            .map(|(name, usage, pricing, expected)| Column {
                name,
                usage,
                pricing,
                expected: Some(expected),
            })
            .collect(),
    };
    if columns.is_empty() {
        return Err(CliError::input("no cost columns"));
    }
    let mut breakdowns = Vec::new();
    for c in &columns {
        breakdowns.push((c.name.clone(), trajectory_cost(&c.usage, &c.pricing)?));
    }

    let mut rows = Vec::new();
    let mut campaigns = Vec::new();
    for &n in &a.samples {
        for (c, (name, b)) in columns.iter().zip(&breakdowns) {
            let dollars = campaign_cost(n, b);
            // campaign totals in the scaling table are quoted from the published per-trajectory figure
            let published = c.expected.map(|t| campaign_cost(n, &CostBreakdown { total: t, ..CostBreakdown::default() }));
            rows.push(vec![
                n.to_string(),
                name.clone(),
                format!("{:.4}", b.total),
                format!("{dollars:.2}"),
                published.map_or_else(String::new, |d| format!("{d:.2}")),
            ]);
            campaigns.push(json!({
                "samples": n, "column": name, "per_trajectory": b.total, "dollars": dollars,
                "x_thousands": dollars / 1000.0, "dollars_at_published_total": published,
            }));
        }
    }
    let report = json!({
        "columns": columns.iter().zip(&breakdowns).map(|(c, (_, b))| json!({
            "name": c.name,
            "pricing": c.pricing,
            "breakdown": b,
            "expected_total": c.expected,
        })).collect::<Vec<_>>(),
        "campaigns": campaigns,
    });

    let mut outputs = Vec::new();
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        let path = dir.join(REPORT);
        write_json(&path, &report)?;
        outputs.push(path);
    }
    let header = ["samples", "column", "per_trajectory", "dollars", "dollars_published"];
    let mut text = render_table(&breakdowns);
    text.push('\n');
    text.push_str(&table(&header, &rows));
    Ok(Outcome {
        report,
        table: text,
        csv_header: header.map(String::from).to_vec(),
        csv_rows: rows,
        config: a.config.clone(),
        outputs,
        ..Outcome::default()
    })
}
