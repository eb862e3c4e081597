//! Cost-performance power law `y = c - a * x^(-b)`.
//!
//! The model is linear in `(c, a)` once `b` is fixed, so the fit profiles
//! the residual sum of squares over `b`: every candidate exponent gets its
//! exact weighted least-squares `(c, a)`, a dense grid brackets the best
//! exponent and golden-section search refines it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("cost must be positive, got {0}")]
    NonPositiveCost(f64),
    #[error("degenerate design: all costs are equal")]
    Degenerate,
    #[error("invalid exponent range ({0}, {1})")]
    ExponentRange(f64, f64),
    #[error("fit does not describe a rising curve (a = {a})")]
    NotRising { a: f64 },
    #[error("cost must be positive, got {0}")]
    Domain(f64),
    #[error("target {target}% exceeds the asymptote c = {c}%")]
    AboveAsymptote { target: f64, c: f64 },
}

/// One observed (cost, performance) pair; cost in thousands of dollars,
/// performance in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPerfPoint {
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    #[serde(default = "one")]
    pub n_seeds: usize,
}

fn one() -> usize {
    1
}

impl CostPerfPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            std: None,
            n_seeds: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    pub mean_abs_error: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Weight each point by 1/std²; points without std get weight 1.
    InverseVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub b_min: f64,
    pub b_max: f64,
    pub grid: usize,
    pub weighting: Weighting,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            b_min: 0.01,
            b_max: 3.0,
            grid: 2000,
            weighting: Weighting::Uniform,
        }
    }
}

const GOLDEN_TOL: f64 = 1e-10;

/// Weighted least squares for `(c, a)` with the exponent held fixed.
/// Returns `(c, a, weighted_sse)`.
pub fn solve_linear(points: &[CostPerfPoint], weights: &[f64], b: f64) -> Option<(f64, f64, f64)> {
    let (mut sw, mut sz, mut sy, mut szz, mut szy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, w) in points.iter().zip(weights) {
        let z = p.x.powf(-b);
        sw += w;
        sz += w * z;
        sy += w * p.y;
        szz += w * z * z;
        szy += w * z * p.y;
    }
    // y = c + slope * z with slope = -a
    let zbar = sz / sw;
    let ybar = sy / sw;
    let sxx = szz - sw * zbar * zbar;
    if !(sxx > 1e-300 * szz.max(1.0)) || !sxx.is_finite() {
        return None;
    }
    let slope = (szy - sw * zbar * ybar) / sxx;
    let c = ybar - slope * zbar;
    let a = -slope;
    let sse = points
        .iter()
        .zip(weights)
        .map(|(p, w)| {
            let r = p.y - (c - a * p.x.powf(-b));
            w * r * r
        })
        .sum();
    Some((c, a, sse))
}

fn weights(points: &[CostPerfPoint], weighting: Weighting) -> Vec<f64> {
    points
        .iter()
        .map(|p| match (weighting, p.std) {
            (Weighting::InverseVariance, Some(s)) if s > 0.0 => 1.0 / (s * s),
            _ => 1.0,
        })
        .collect()
}

fn check(points: &[CostPerfPoint], opts: &FitOptions) -> Result<(), FitError> {
    if points.len() < 4 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    if let Some(p) = points.iter().find(|p| !(p.x > 0.0)) {
        return Err(FitError::NonPositiveCost(p.x));
    }
    if points.iter().all(|p| p.x == points[0].x) {
        return Err(FitError::Degenerate);
    }
    if !(opts.b_min > 0.0 && opts.b_min < opts.b_max && opts.b_max.is_finite()) {
        return Err(FitError::ExponentRange(opts.b_min, opts.b_max));
    }
    Ok(())
}

/// Residual sum of squares profiled over the exponent.
pub fn profile_sse(points: &[CostPerfPoint], b: f64, weighting: Weighting) -> f64 {
    let w = weights(points, weighting);
    solve_linear(points, &w, b).map_or(f64::INFINITY, |(_, _, sse)| sse)
}

pub fn fit_power_law(points: &[CostPerfPoint], opts: &FitOptions) -> Result<ScalingFit, FitError> {
    check(points, opts)?;
    let w = weights(points, opts.weighting);
    let sse = |b: f64| solve_linear(points, &w, b).map_or(f64::INFINITY, |(_, _, s)| s);

    let n = opts.grid.max(1000);
    let step = (opts.b_max - opts.b_min) / (n - 1) as f64;
    let grid_b = |i: usize| opts.b_min + step * i as f64;
    let best = (0..n)
        .map(|i| (i, sse(grid_b(i))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap();
    if !sse(grid_b(best)).is_finite() {
        return Err(FitError::Degenerate);
    }

    let mut lo = grid_b(best.saturating_sub(1));
    let mut hi = grid_b((best + 1).min(n - 1));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (sse(x1), sse(x2));
    while hi - lo > GOLDEN_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = sse(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = sse(x2);
        }
    }
    // The refined bracket can only improve on the grid point.
    let b = [grid_b(best), (lo + hi) / 2.0]
        .into_iter()
        .min_by(|a, b| sse(*a).total_cmp(&sse(*b)))
        .unwrap();
    let (c, a, _) = solve_linear(points, &w, b).ok_or(FitError::Degenerate)?;
    if !(a > 0.0) {
        return Err(FitError::NotRising { a });
    }
    Ok(diagnose(points, c, a, b))
}

fn diagnose(points: &[CostPerfPoint], c: f64, a: f64, b: f64) -> ScalingFit {
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut ss_res, mut ss_tot, mut abs) = (0.0, 0.0, 0.0);
    for p in points {
        let r = p.y - (c - a * p.x.powf(-b));
        ss_res += r * r;
        ss_tot += (p.y - mean).powi(2);
        abs += r.abs();
    }
    ScalingFit {
        c,
        a,
        b,
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
        mean_abs_error: abs / n,
    }
}

impl ScalingFit {
    /// Unclamped curve value.
    pub fn curve(&self, x: f64) -> f64 {
        self.c - self.a * x.powf(-self.b)
    }
}

/// Predicted performance at cost `x`, clamped to [0, 100].
pub fn predict(fit: &ScalingFit, x: f64) -> Result<f64, FitError> {
    if !(x > 0.0) {
        return Err(FitError::Domain(x));
    }
    Ok(fit.curve(x).clamp(0.0, 100.0))
}

/// Cost needed to reach `y_target`: `(a / (c - y))^(1/b)`.
pub fn invert(fit: &ScalingFit, y_target: f64) -> Result<f64, FitError> {
    if !(y_target < fit.c) {
        return Err(FitError::AboveAsymptote {
            target: y_target,
            c: fit.c,
        });
    }
    Ok((fit.a / (fit.c - y_target)).powf(1.0 / fit.b))
}

/// Held-out residual (prediction − observation) for each point when the
/// curve is refit without it.
pub fn leave_one_out(points: &[CostPerfPoint], opts: &FitOptions) -> Result<Vec<f64>, FitError> {
    (0..points.len())
        .map(|i| {
            let rest: Vec<_> = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, p)| p.clone())
                .collect();
            let fit = fit_power_law(&rest, opts)?;
            Ok(fit.curve(points[i].x) - points[i].y)
        })
        .collect()
}

/// The seven self-hosted (vLLM) scaling points: cost in $K, mean resolve
/// rate and seed std over three seeds.
pub fn vllm_reference_points() -> Vec<CostPerfPoint> {
    [
        (0.075, 33.47, 0.81),
        (0.140, 36.40, 1.25),
        (0.280, 38.87, 1.15),
        (0.560, 39.67, 1.62),
        (0.784, 41.80, 3.56),
        (1.382, 44.00, 1.22),
        (2.987, 46.60, 0.69),
    ]
    .into_iter()
    .map(|(x, y, s)| CostPerfPoint {
        x,
        y,
        std: Some(s),
        n_seeds: 3,
    })
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> Vec<CostPerfPoint> {
        [0.1, 0.3, 0.7, 1.5, 3.0, 8.0]
            .into_iter()
            .map(|x: f64| CostPerfPoint::new(x, 70.0 - 10.0 * x.powf(-0.5)))
            .collect()
    }

    #[test]
    fn exact_recovery() {
        let fit = fit_power_law(&synthetic(), &FitOptions::default()).unwrap();
        assert!((fit.c - 70.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.a - 10.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.b - 0.5).abs() < 1e-6, "{fit:?}");
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn input_errors() {
        let pts = synthetic();
        let opts = FitOptions::default();
        assert_eq!(fit_power_law(&pts[..3], &opts), Err(FitError::TooFewPoints(3)));
        let mut neg = pts.clone();
        neg[0].x = -1.0;
        assert_eq!(fit_power_law(&neg, &opts), Err(FitError::NonPositiveCost(-1.0)));
        let same: Vec<_> = (0..5).map(|i| CostPerfPoint::new(2.0, i as f64)).collect();
        assert_eq!(fit_power_law(&same, &opts), Err(FitError::Degenerate));
    }

    #[test]
    fn predict_and_invert_examples() {
        let fit = ScalingFit { c: 70.0, a: 10.0, b: 0.5, r_squared: 1.0, mean_abs_error: 0.0 };
        assert_eq!(predict(&fit, 1.0).unwrap(), 60.0);
        assert!((predict(&fit, 1e12).unwrap() - 70.0).abs() < 1e-4);
        assert_eq!(invert(&fit, 60.0).unwrap(), 1.0);
        assert!(matches!(predict(&fit, 0.0), Err(FitError::Domain(_))));
        assert_eq!(
            invert(&fit, 70.0),
            Err(FitError::AboveAsymptote { target: 70.0, c: 70.0 })
        );
        // deep below zero clamps
        assert_eq!(predict(&fit, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn refining_the_grid_never_increases_sse() {
        let pts = vllm_reference_points();
        let coarse = FitOptions { grid: 1000, ..FitOptions::default() };
        let fine = FitOptions { grid: 8000, ..FitOptions::default() };
        let s = |f: ScalingFit| profile_sse(&pts, f.b, Weighting::Uniform);
        let a = s(fit_power_law(&pts, &coarse).unwrap());
        let b = s(fit_power_law(&pts, &fine).unwrap());
        assert!(b <= a + 1e-12, "{b} > {a}");
    }

    #[test]
    fn weighting_changes_the_fit() {
        let pts = vllm_reference_points();
        let u = fit_power_law(&pts, &FitOptions::default()).unwrap();
        let w = fit_power_law(
            &pts,
            &FitOptions { weighting: Weighting::InverseVariance, ..FitOptions::default() },
        )
        .unwrap();
        assert_ne!(u.b, w.b);
    }
}
