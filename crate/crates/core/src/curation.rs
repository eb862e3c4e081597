//! Dataset curation: filters, truncation-ratio ordering, fixed-size
//! partitions, ordered truncated selection, seeded mixtures and
//! patch-level deduplication.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patchdiff::{self, patch_total_lines};
use crate::trajectory::{self, mean_tool_output_tokens, truncation_ratio, TokenCounter, Trajectory};

pub const DEFAULT_MAX_PATCH_LINES: usize = 40;
pub const DEFAULT_MAX_MEAN_TOOL_TOKENS: f64 = 600.0;
pub const DEFAULT_PARTITION_SIZE: usize = 3000;
pub const DEFAULT_MIN_RATIO: f64 = 0.88;
pub const DEFAULT_CONTEXT_LIMIT: usize = 32_768;

#[derive(Debug, Error, PartialEq)]
pub enum CurationError {
    #[error("source {label:?} has {available} records but the mix needs {needed}")]
    InsufficientSource {
        label: String,
        available: usize,
        needed: usize,
    },
    #[error("mix proportions sum to {0}, expected 1")]
    Proportions(f64),
    #[error("duplicate source label {0:?}")]
    DuplicateLabel(String),
    #[error("mix references unknown source {0:?}")]
    UnknownSource(String),
    #[error("proportion for {label:?} is {value}, expected a value in [0, 1]")]
    ProportionRange { label: String, value: f64 },
    #[error("min_ratio must be in (0, 1], got {0}")]
    MinRatio(f64),
}

fn parsed_total_lines(t: &Trajectory) -> Option<usize> {
    let text = t.patch.as_deref()?;
    match patchdiff::parse_unified_diff(text) {
        Ok(p) => Some(patch_total_lines(&p)),
        Err(e) => {
            tracing::warn!(id = %t.id, error = %e, "dropping trajectory with unparseable patch");
            None
        }
    }
}

/// Keeps trajectories whose patch has at most `max_lines` changed lines.
pub fn filter_patch_lines(records: Vec<Trajectory>, max_lines: usize) -> Vec<Trajectory> {
    records
        .into_iter()
        .filter(|t| parsed_total_lines(t).is_some_and(|n| n <= max_lines))
        .collect()
}

/// Keeps trajectories whose mean tool-output length is at most `max_mean_tokens`.
pub fn filter_tool_output(
    records: Vec<Trajectory>,
    max_mean_tokens: f64,
    counter: &dyn TokenCounter,
) -> Vec<Trajectory> {
    records
        .into_iter()
        .filter(|t| mean_tool_output_tokens(t, counter) <= max_mean_tokens)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranked {
    pub trajectory: Trajectory,
    pub ratio: f64,
}

/// Descending truncation ratio, ties broken by id.
pub fn order_by_truncation_ratio(
    records: Vec<Trajectory>,
    limit: usize,
    counter: &dyn TokenCounter,
) -> Vec<Ranked> {
    let mut ranked: Vec<Ranked> = records
        .into_iter()
        .map(|t| Ranked {
            ratio: truncation_ratio(&t, limit, counter),
            trajectory: t,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.ratio
            .total_cmp(&a.ratio)
            .then_with(|| a.trajectory.id.cmp(&b.trajectory.id))
    });
    ranked
}

/// Consecutive chunks of exactly `size`; a short tail is dropped.
pub fn partition_fixed(ordered: Vec<Ranked>, size: usize) -> Vec<Vec<Ranked>> {
    assert!(size > 0, "partition size must be positive");
    if ordered.len() < size {
        tracing::warn!(
            records = ordered.len(),
            size,
            "fewer records than one partition; no partitions produced"
        );
        return Vec::new();
    }
    let full = ordered.len() / size;
    let mut out = Vec::with_capacity(full);
    let mut iter = ordered.into_iter();
    for _ in 0..full {
        out.push(iter.by_ref().take(size).collect());
    }
    out
}

/// Orders by truncation ratio and takes records until `target` is reached
/// or the next ratio falls below `min_ratio`, whichever binds first.
/// Over-long selections are truncated to whole-step prefixes.
pub fn select_ordered_truncated(
    records: Vec<Trajectory>,
    limit: usize,
    counter: &dyn TokenCounter,
    min_ratio: f64,
    target: usize,
) -> Result<Vec<Trajectory>, CurationError> {
    if !(min_ratio > 0.0 && min_ratio <= 1.0) {
        return Err(CurationError::MinRatio(min_ratio));
    }
    let mut out = Vec::new();
    for ranked in order_by_truncation_ratio(records, limit, counter) {
        if out.len() >= target || ranked.ratio < min_ratio {
            break;
        }
        out.push(fit_to_limit(&ranked, limit, counter));
    }
    Ok(out)
}

fn fit_to_limit(ranked: &Ranked, limit: usize, counter: &dyn TokenCounter) -> Trajectory {
    if ranked.ratio >= 1.0 {
        return ranked.trajectory.clone();
    }
    trajectory::truncate(&ranked.trajectory, limit, counter)
        .expect("ratio > 0 implies a non-empty fitting prefix")
}

/// Baseline that slices randomly chosen trajectories regardless of ratio.
/// Trajectories whose first step alone exceeds the limit are skipped.
pub fn select_random_truncated(
    records: Vec<Trajectory>,
    limit: usize,
    counter: &dyn TokenCounter,
    target: usize,
    seed: u64,
) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = records;
    pool.shuffle(&mut rng);
    pool.iter()
        .filter_map(|t| trajectory::truncate(t, limit, counter).ok())
        .take(target)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub label: String,
    pub records: Vec<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixShare {
    pub label: String,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub sources: Vec<Source>,
    pub mix: Vec<MixShare>,
    pub target_size: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), CurationError> {
        let mut seen = HashSet::new();
        for s in &self.sources {
            if !seen.insert(s.label.as_str()) {
                return Err(CurationError::DuplicateLabel(s.label.clone()));
            }
        }
        let mut mixed = HashSet::new();
        for share in &self.mix {
            if !seen.contains(share.label.as_str()) {
                return Err(CurationError::UnknownSource(share.label.clone()));
            }
            if !mixed.insert(share.label.as_str()) {
                return Err(CurationError::DuplicateLabel(share.label.clone()));
            }
            if !(0.0..=1.0).contains(&share.proportion) {
                return Err(CurationError::ProportionRange {
                    label: share.label.clone(),
                    value: share.proportion,
                });
            }
        }
        let sum: f64 = self.mix.iter().map(|s| s.proportion).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CurationError::Proportions(sum));
        }
        Ok(())
    }

    /// Records drawn per source: ⌊p·N⌋ each, remainder to the largest share
    /// (first listed on ties).
    pub fn quotas(&self) -> Vec<(String, usize)> {
        let mut quotas: Vec<(String, usize)> = self
            .mix
            .iter()
            .map(|s| {
                let q = (s.proportion * self.target_size as f64 + 1e-9).floor() as usize;
                (s.label.clone(), q)
            })
            .collect();
        let assigned: usize = quotas.iter().map(|(_, q)| q).sum();
        if let Some(largest) = self
            .mix
            .iter()
            .enumerate()
            .rev()
            .max_by(|a, b| a.1.proportion.total_cmp(&b.1.proportion))
            .map(|(i, _)| i)
        {
            quotas[largest].1 += self.target_size.saturating_sub(assigned);
        }
        quotas
    }
}

/// Two-source mixture with specialization ratio `alpha`.
pub fn specialization_spec(
    specialized: Source,
    general: Source,
    alpha: f64,
    target_size: usize,
    seed: u64,
) -> DatasetSpec {
    DatasetSpec {
        mix: vec![
            MixShare {
                label: specialized.label.clone(),
                proportion: alpha,
            },
            MixShare {
                label: general.label.clone(),
                proportion: 1.0 - alpha,
            },
        ],
        sources: vec![specialized, general],
        target_size,
        seed,
    }
}

/// Seeded sampling without replacement from each source, then a seeded
/// shuffle of the combined set.
pub fn mix(spec: &DatasetSpec) -> Result<Vec<Trajectory>, CurationError> {
    spec.validate()?;
    let by_label: HashMap<&str, &Source> =
        spec.sources.iter().map(|s| (s.label.as_str(), s)).collect();
    let quotas = spec.quotas();
    for (label, needed) in &quotas {
        let available = by_label[label.as_str()].records.len();
        if available < *needed {
            return Err(CurationError::InsufficientSource {
                label: label.clone(),
                available,
                needed: *needed,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.target_size);
    for (label, needed) in &quotas {
        let source = by_label[label.as_str()];
        let picked = rand::seq::index::sample(&mut rng, source.records.len(), *needed);
        let mut picked: Vec<usize> = picked.into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| source.records[i].clone()));
    }
    out.shuffle(&mut rng);
    Ok(out)
}

/// Keeps the first trajectory of every duplicate-patch class. Trajectories
/// without a parseable patch are kept as-is.
pub fn dedup_by_patch(records: Vec<Trajectory>) -> Vec<Trajectory> {
    let mut seen = HashSet::new();
    records
        .into_iter()
        .filter(|t| {
            let Some(text) = t.patch.as_deref() else {
                return true;
            };
            match patchdiff::parse_unified_diff(text) {
                Ok(p) => seen.insert(p.normalized()),
                Err(_) => true,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::fixtures::{meta, uniform};
    use crate::trajectory::{ByteQuarterCounter, RolloutStage, Step};

    fn patch_with_lines(n: usize) -> String {
        let mut s = format!("--- a/f.py\n+++ b/f.py\n@@ -1,0 +1,{n} @@\n");
        for i in 0..n {
            s.push_str(&format!("+line {i}\n"));
        }
        s
    }

    fn patched(id: &str, lines: usize) -> Trajectory {
        let mut t = uniform(id, 1, 4);
        t.patch = Some(patch_with_lines(lines));
        t
    }

    #[test]
    fn patch_line_filter_boundary() {
        assert_eq!(filter_patch_lines(vec![patched("a", 40)], 40).len(), 1);
        assert!(filter_patch_lines(vec![patched("b", 41)], 40).is_empty());
        assert!(filter_patch_lines(Vec::new(), 40).is_empty());
        let fixture: Vec<_> = [5, 41, 12, 40, 99, 1, 0, 60, 39, 20]
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let mut t = patched(&format!("t{i}"), (*n).max(1));
                if *n == 0 {
                    t.patch = Some(String::new());
                }
                t
            })
            .collect();
        assert_eq!(filter_patch_lines(fixture, 40).len(), 7);
    }

    fn with_tool_results(id: &str, sizes: &[usize]) -> Trajectory {
        let mut t = Trajectory::new(id, RolloutStage::First, meta());
        for s in sizes {
            t.push(Step::tool("y".repeat(*s)));
        }
        t
    }

    #[test]
    fn tool_output_filter_boundary() {
        let c = ByteQuarterCounter;
        let at = with_tool_results("at", &[2400]); // 600 tokens
        let over = with_tool_results("over", &[2401]); // 601 tokens
        let none = uniform("none", 2, 4);
        let kept = filter_tool_output(vec![at, over, none], 600.0, &c);
        let ids: Vec<_> = kept.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["at", "none"]);
        // means: (100+300)/2=200, (1000+1404)/2=1202, 50
        let fixture = vec![
            with_tool_results("a", &[400, 1200]),
            with_tool_results("b", &[4000, 5616]),
            with_tool_results("c", &[200]),
        ];
        let kept = filter_tool_output(fixture, 600.0, &c);
        let ids: Vec<_> = kept.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["a", "c"]);
    }

    #[test]
    fn ordering_examples() {
        let c = ByteQuarterCounter;
        // 20 steps of 100 tokens, limit 1900 -> 0.95; 10 steps with 5 fitting -> 0.5
        let full = uniform("z", 2, 400);
        let ninety_five = uniform("m", 20, 400);
        let half = uniform("a", 38, 400);
        let ordered = order_by_truncation_ratio(vec![half, full, ninety_five], 1900, &c);
        let ratios: Vec<f64> = ordered.iter().map(|r| r.ratio).collect();
        assert_eq!(ratios, vec![1.0, 0.95, 0.5]);
        let ties = order_by_truncation_ratio(
            vec![uniform("b", 1, 4), uniform("c", 1, 4), uniform("a", 1, 4)],
            100,
            &c,
        );
        let ids: Vec<_> = ties.iter().map(|r| r.trajectory.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    fn ranked(n: usize) -> Vec<Ranked> {
        (0..n)
            .map(|i| Ranked {
                trajectory: uniform(&format!("{i:05}"), 1, 4),
                ratio: 1.0 - i as f64 / n as f64,
            })
            .collect()
    }

    #[test]
    fn partition_counts() {
        assert_eq!(partition_fixed(ranked(2999), 3000).len(), 0);
        let parts = partition_fixed(ranked(7000), 3000);
        assert_eq!(parts.len(), 2);
        assert!(parts.iter().all(|p| p.len() == 3000));
    }

    #[test]
    fn ordered_selection_respects_min_ratio() {
        let c = ByteQuarterCounter;
        // 20 steps x 100 tokens; limits chosen so ratios are 0.95, 0.90, 0.85
        let limit = 1900;
        let a = uniform("a", 20, 400); // 19/20 = 0.95
        let b = {
            let mut t = uniform("b", 20, 400);
            t.steps[18].content = "x".repeat(800); // 18 fit -> 0.90
            t
        };
        let d = {
            let mut t = uniform("d", 20, 400);
            t.steps[17].content = "x".repeat(800);
            t.steps[16].content = "x".repeat(800);
            t
        };
        let ratios: Vec<f64> = [&a, &b, &d].iter().map(|t| truncation_ratio(t, limit, &c)).collect();
        assert_eq!(ratios, vec![0.95, 0.9, 0.85]);
        let picked = select_ordered_truncated(vec![d, b, a], limit, &c, 0.88, 10).unwrap();
        let ids: Vec<_> = picked.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(picked[0].steps.len(), 19);
        assert_eq!(picked[1].steps.len(), 18);
        assert!(picked.iter().all(|t| trajectory::trajectory_tokens(t, &c) <= limit));
    }

    #[test]
    fn ordered_selection_all_fit_and_target() {
        let c = ByteQuarterCounter;
        let pool: Vec<_> = (0..5).map(|i| uniform(&format!("t{i}"), 2, 40)).collect();
        let picked = select_ordered_truncated(pool.clone(), 1000, &c, 0.88, 3).unwrap();
        assert_eq!(picked, pool[..3].to_vec());
        assert!(select_ordered_truncated(pool, 1000, &c, 0.0, 3).is_err());
    }

    #[test]
    fn ordered_and_random_selection_differ() {
        let c = ByteQuarterCounter;
        let pool: Vec<_> = (0..40)
            .map(|i| uniform(&format!("t{i:02}"), 10 + i, 400))
            .collect();
        let ordered = select_ordered_truncated(pool.clone(), 1000, &c, 0.1, 10).unwrap();
        let random = select_random_truncated(pool, 1000, &c, 10, 7);
        let o: HashSet<_> = ordered.iter().map(|t| t.id.clone()).collect();
        let r: HashSet<_> = random.iter().map(|t| t.id.clone()).collect();
        assert_eq!(random.len(), 10);
        assert_ne!(o, r);
    }

    fn source(label: &str, n: usize) -> Source {
        Source {
            label: label.into(),
            records: (0..n).map(|i| uniform(&format!("{label}-{i}"), 1, 4)).collect(),
        }
    }

    fn count_prefix(records: &[Trajectory], label: &str) -> usize {
        records
            .iter()
            .filter(|t| t.id.starts_with(&format!("{label}-")))
            .count()
    }

    #[test]
    fn mix_examples() {
        let full = mix(&specialization_spec(source("django", 50), source("general", 50), 1.0, 40, 1)).unwrap();
        assert_eq!(count_prefix(&full, "django"), 40);

        let spec = DatasetSpec {
            sources: vec![source("django", 5000), source("sympy", 5000)],
            mix: vec![
                MixShare { label: "django".into(), proportion: 0.5 },
                MixShare { label: "sympy".into(), proportion: 0.5 },
            ],
            target_size: 8000,
            seed: 3,
        };
        let out = mix(&spec).unwrap();
        assert_eq!(count_prefix(&out, "django"), 4000);
        assert_eq!(count_prefix(&out, "sympy"), 4000);
        assert_eq!(mix(&spec).unwrap(), out);
        let ids: HashSet<_> = out.iter().map(|t| &t.id).collect();
        assert_eq!(ids.len(), 8000);
    }

    #[test]
    fn mix_errors_and_remainders() {
        let short = specialization_spec(source("a", 3), source("b", 100), 0.5, 10, 0);
        assert_eq!(
            mix(&short),
            Err(CurationError::InsufficientSource { label: "a".into(), available: 3, needed: 5 })
        );
        let bad = DatasetSpec {
            mix: vec![MixShare { label: "a".into(), proportion: 0.7 }],
            ..short.clone()
        };
        assert!(matches!(mix(&bad), Err(CurationError::Proportions(_))));
        let thirds = DatasetSpec {
            sources: vec![source("a", 10), source("b", 10), source("c", 10)],
            mix: vec![
                MixShare { label: "a".into(), proportion: 0.3 },
                MixShare { label: "b".into(), proportion: 0.4 },
                MixShare { label: "c".into(), proportion: 0.3 },
            ],
            target_size: 11,
            seed: 0,
        };
        // floor: 3, 4, 3 -> remainder 1 goes to b
        assert_eq!(
            thirds.quotas(),
            vec![("a".into(), 3), ("b".into(), 5), ("c".into(), 3)]
        );
    }

    #[test]
    fn dedup_examples() {
        let distinct: Vec<_> = (1..4).map(|n| patched(&format!("t{n}"), n)).collect();
        assert_eq!(dedup_by_patch(distinct.clone()), distinct);
        assert_eq!(dedup_by_patch(vec![patched("a", 2), patched("b", 2)]).len(), 1);
        // three classes over seven records
        let sizes = [1, 2, 1, 3, 2, 2, 3];
        let fixture: Vec<_> = sizes.iter().enumerate().map(|(i, n)| patched(&format!("t{i}"), *n)).collect();
        let kept = dedup_by_patch(fixture);
        let ids: Vec<_> = kept.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["t0", "t1", "t3"]);
    }
}
