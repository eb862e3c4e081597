//! Seed-level summaries, signal-to-noise ratios and seed budgets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("seed group {0:?} is empty")]
    Empty(String),
    #[error("seed group {label:?} needs at least {needed} values, has {got}")]
    TooFewSeeds { label: String, needed: usize, got: usize },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedGroup {
    pub label: String,
    pub values: Vec<f64>,
}

impl SeedGroup {
    pub fn new(label: impl Into<String>, values: impl Into<Vec<f64>>) -> Self {
        Self {
            label: label.into(),
            values: values.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Mean and sample (n − 1) standard deviation.
pub fn summarize(group: &SeedGroup) -> Result<Summary, StatsError> {
    let n = group.values.len();
    if n == 0 {
        return Err(StatsError::Empty(group.label.clone()));
    }
    let mean = group.values.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        let ss: f64 = group.values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Ok(Summary { mean, std, n })
}

/// |Δmean| / sqrt((std_a² + std_b²) / 2).
pub fn snr_from_summaries(a: &Summary, b: &Summary) -> f64 {
    let diff = (a.mean - b.mean).abs();
    if diff == 0.0 {
        return 0.0;
    }
    let pooled = ((a.std * a.std + b.std * b.std) / 2.0).sqrt();
    if pooled == 0.0 {
        return f64::INFINITY;
    }
    diff / pooled
}

pub fn snr(a: &SeedGroup, b: &SeedGroup) -> Result<f64, StatsError> {
    for g in [a, b] {
        if g.values.len() < 2 {
            return Err(StatsError::TooFewSeeds {
                label: g.label.clone(),
                needed: 2,
                got: g.values.len(),
            });
        }
    }
    Ok(snr_from_summaries(&summarize(a)?, &summarize(b)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceTier {
    Low,
    Borderline,
    Real,
}

pub fn confidence_tier(snr: f64) -> ConfidenceTier {
    if snr < 1.0 {
        ConfidenceTier::Low
    } else if snr <= 2.0 {
        ConfidenceTier::Borderline
    } else {
        ConfidenceTier::Real
    }
}

/// Multiplier on std²/effect² in the seed budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingFactor {
    /// `(2·std/δ)²`.
    Literal,
    /// Two independent groups: the difference of means carries twice the
    /// variance, `8·std²/δ²`.
    #[default]
    TwoGroup,
}

impl PoolingFactor {
    pub fn value(self) -> f64 {
        match self {
            PoolingFactor::Literal => 4.0,
            PoolingFactor::TwoGroup => 8.0,
        }
    }
}

pub const MIN_SEEDS: u32 = 2;

/// Seeds per arm for SNR ≥ 2 at effect size `effect`, never below 2.
pub fn seeds_required(effect: f64, std: f64, factor: PoolingFactor) -> Result<u32, StatsError> {
    if !(effect > 0.0) {
        return Err(StatsError::NonPositive { name: "effect", value: effect });
    }
    if !(std > 0.0) {
        return Err(StatsError::NonPositive { name: "std", value: std });
    }
    let raw = factor.value() * std * std / (effect * effect);
    // guard against 2.0000000000000004-style ceilings
    let n = (raw - 1e-9).ceil().max(0.0) as u32;
    Ok(n.max(MIN_SEEDS))
}

/// Seven scaling-study rows: (samples, per-seed resolve rates).
pub fn scaling_seed_rows() -> Vec<(u32, [f64; 3])> {
    vec![
        (400, [34.40, 33.00, 33.00]),
        (750, [36.80, 35.00, 37.40]),
        (1_500, [38.20, 40.20, 38.20]),
        (3_000, [40.60, 37.80, 40.60]),
        (4_200, [40.60, 45.80, 39.00]),
        (7_400, [43.20, 45.40, 43.40]),
        (16_000, [47.00, 47.00, 45.80]),
    ]
}
