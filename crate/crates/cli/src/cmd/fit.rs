use serde::Deserialize;
use serde_json::json;
use softverify::costmodel::cost_to_match;
use softverify::scaling::{
    fit_power_law, invert, leave_one_out, vllm_reference_points, CostPerfPoint, FitOptions, Weighting,
};

use super::{ensure_dir, read_json, write_json};
use crate::output::{fmt_f, table};
use crate::{CliError, FitArgs, Outcome, WeightingArg};

pub const REPORT: &str = "fit.json";

/// A bare list of points, or points with fit options.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FitInput {
    Points(Vec<CostPerfPoint>),
    Full {
        points: Vec<CostPerfPoint>,
        #[serde(default)]
        options: Option<FitOptions>,
    },
}

pub fn run(a: &FitArgs) -> Result<Outcome, CliError> {
    let (points, opts) = match &a.input {
        Some(p) => match read_json::<FitInput>(p)? {
            FitInput::Points(points) => (points, None),
            FitInput::Full { points, options } => (points, options),
        },
        None => (vllm_reference_points(), None),
    };
    let mut opts = opts.unwrap_or_default();
    opts.weighting = match a.weighting {
        WeightingArg::Uniform => Weighting::Uniform,
        WeightingArg::InverseVariance => Weighting::InverseVariance,
    };
    let fit = fit_power_law(&points, &opts)?;
    let loo = leave_one_out(&points, &opts)?;
    let max_loo = loo.iter().fold(0.0_f64, |m, r| m.max(r.abs()));

    let mut inversions = Vec::new();
    for &y in &a.target {
        let entry = match (invert(&fit, y), cost_to_match(&fit, y)) {
            (Ok(x), Ok(dollars)) => json!({"target": y, "x": x, "dollars": dollars}),
            (Err(e), _) => json!({"target": y, "error": e.to_string()}),
            (_, Err(e)) => json!({"target": y, "error": e.to_string()}),
        };
        inversions.push(entry);
    }
    let report = json!({
        "fit": fit,
        "options": opts,
        "points": points.len(),
        "leave_one_out": loo,
        "max_abs_leave_one_out": max_loo,
        "inversions": inversions,
    });

    let mut outputs = Vec::new();
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        let path = dir.join(REPORT);
        write_json(&path, &report)?;
        outputs.push(path);
    }

    let rows: Vec<Vec<String>> = points
        .iter()
        .zip(&loo)
        .map(|(p, r)| vec![fmt_f(p.x, 3), fmt_f(p.y, 2), fmt_f(fit.curve(p.x), 2), fmt_f(*r, 3)])
        .collect();
    let mut text = format!(
        "y = {:.3} - {:.3} * x^(-{:.4})   R^2 {:.4}   MAE {:.3}   max |LOO| {:.3}\n\n",
        fit.c, fit.a, fit.b, fit.r_squared, fit.mean_abs_error, max_loo
    );
    text.push_str(&table(&["x ($K)", "observed", "fitted", "loo residual"], &rows));
    for inv in &inversions {
        match inv.get("dollars").and_then(|d| d.as_f64()) {
            Some(d) => text.push_str(&format!("target {}: ${d:.0}\n", inv["target"])),
            None => text.push_str(&format!("target {}: {}\n", inv["target"], inv["error"].as_str().unwrap_or(""))),
        }
    }
    Ok(Outcome {
        report,
        table: text,
        csv_header: ["x", "observed", "fitted", "loo_residual"].map(String::from).to_vec(),
        csv_rows: rows,
        inputs: a.input.iter().cloned().collect(),
        outputs,
        ..Outcome::default()
    })
}
