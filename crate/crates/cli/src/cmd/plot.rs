use std::path::Path;

use clap::ValueEnum;
use serde_json::json;
use softverify::jsonl::read_jsonl;
use softverify::scaling::{fit_power_law, vllm_reference_points, CostPerfPoint, FitOptions};
use softverify::trajectory::{trajectory_tokens, truncation_ratio};
use softverify::{ByteQuarterCounter, Trajectory, VerificationRecord};

use super::{ensure_dir, read_json};
use crate::output::{fmt_f, table};
use crate::{CliError, Outcome, PlotArgs};

/// Curve samples drawn between the smallest and largest observed cost.
pub const CURVE_SAMPLES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Series {
    /// Observed points plus the fitted curve.
    Scaling,
    /// Recall per verified pair.
    Verification,
    /// Token count and truncation ratio per trajectory.
    Truncation,
}

impl Series {
    fn name(self) -> &'static str {
        match self {
            Series::Scaling => "scaling",
            Series::Verification => "verification",
            Series::Truncation => "truncation",
        }
    }
}

fn need_input(input: Option<&Path>, series: Series) -> Result<&Path, CliError> {
    input.ok_or_else(|| CliError::new("usage", format!("plot-data {} needs --input", series.name())))
}

fn scaling(input: Option<&Path>) -> Result<(Vec<&'static str>, Vec<Vec<String>>), CliError> {
    let points: Vec<CostPerfPoint> = match input {
        Some(p) => read_json(p)?,
        None => vllm_reference_points(),
    };
    let fit = fit_power_law(&points, &FitOptions::default())?;
    let mut rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec!["observed".into(), fmt_f(p.x, 4), fmt_f(p.y, 4), p.std.map_or_else(String::new, |s| fmt_f(s, 4))])
        .collect();
    let lo = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min).ln();
    let hi = points.iter().map(|p| p.x).fold(0.0, f64::max).ln();
    for i in 0..CURVE_SAMPLES {
        let x = (lo + (hi - lo) * i as f64 / (CURVE_SAMPLES - 1) as f64).exp();
        rows.push(vec!["fit".into(), fmt_f(x, 4), fmt_f(fit.curve(x), 4), String::new()]);
    }
    Ok((vec!["kind", "x", "y", "std"], rows))
}

pub fn run(a: &PlotArgs) -> Result<Outcome, CliError> {
    let input = a.input.as_deref();
    let (header, rows) = match a.series {
        Series::Scaling => scaling(input)?,
        Series::Verification => {
            let recs: Vec<VerificationRecord> = read_jsonl(need_input(input, a.series)?)?;
            let rows = recs
                .iter()
                .map(|r| {
                    vec![
                        r.trajectory_id.clone(),
                        fmt_f(r.r, 6),
                        serde_json::to_value(r.bucket).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    ]
                })
                .collect();
            (vec!["trajectory_id", "r", "bucket"], rows)
        }
        Series::Truncation => {
            let trajs: Vec<Trajectory> = read_jsonl(need_input(input, a.series)?)?;
            let counter = ByteQuarterCounter;
            let rows = trajs
                .iter()
                .map(|t| {
                    vec![
                        t.id.clone(),
                        t.steps.len().to_string(),
                        trajectory_tokens(t, &counter).to_string(),
                        fmt_f(truncation_ratio(t, a.context_limit, &counter), 6),
                    ]
                })
                .collect();
            (vec!["trajectory_id", "steps", "tokens", "ratio"], rows)
        }
    };

    let csv_header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    let mut outcome = Outcome {
        report: json!({"series": a.series.name(), "header": csv_header, "rows": rows}),
        table: table(&header, &rows),
        csv_header,
        csv_rows: rows,
        inputs: a.input.iter().cloned().collect(),
        ..Outcome::default()
    };
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        let path = dir.join(format!("{}.csv", a.series.name()));
        let text = outcome.render(crate::Format::Csv)?;
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        outcome.outputs.push(path);
    }
    Ok(outcome)
}
