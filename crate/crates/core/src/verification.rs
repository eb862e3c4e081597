//! Soft verification of second-rollout trajectories by patch recall.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patchdiff::{self, IdentityMode, PatchError};
use crate::trajectory::Trajectory;

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("unpatched trajectory {0}")]
    Unpatched(String),
    #[error("trajectory {id}: {source}")]
    Patch {
        id: String,
        #[source]
        source: PatchError,
    },
    #[error("thresholds must be strictly increasing within [0, 1], got {0:?}")]
    Thresholds(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    Unverified,
    Soft,
    Hard,
}

impl Bucket {
    pub fn of(r: f64) -> Bucket {
        if r >= 1.0 {
            Bucket::Hard
        } else if r <= 0.0 {
            Bucket::Unverified
        } else {
            Bucket::Soft
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub trajectory_id: String,
    pub r: f64,
    pub bucket: Bucket,
}

impl VerificationRecord {
    pub fn new(trajectory_id: impl Into<String>, r: f64) -> Self {
        Self {
            trajectory_id: trajectory_id.into(),
            r,
            bucket: Bucket::of(r),
        }
    }
}

fn parsed_patch(t: &Trajectory) -> Result<patchdiff::Patch, VerifyError> {
    let text = t
        .patch
        .as_deref()
        .ok_or_else(|| VerifyError::Unpatched(t.id.clone()))?;
    patchdiff::parse_unified_diff(text).map_err(|source| VerifyError::Patch {
        id: t.id.clone(),
        source,
    })
}

/// Recall of the second rollout's patch against the first rollout's patch.
pub fn verify_pair(
    first: &Trajectory,
    second: &Trajectory,
    mode: IdentityMode,
) -> Result<VerificationRecord, VerifyError> {
    let reference = patchdiff::change_set(&parsed_patch(first)?, mode);
    let candidate = patchdiff::change_set(&parsed_patch(second)?, mode);
    let r = patchdiff::recall(&candidate, &reference).map_err(|source| VerifyError::Patch {
        id: first.id.clone(),
        source,
    })?;
    Ok(VerificationRecord::new(second.id.clone(), r))
}

pub const DEFAULT_THRESHOLDS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// One interval of a threshold partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdGroup {
    pub lower: f64,
    pub upper: f64,
    pub upper_inclusive: bool,
    pub records: Vec<VerificationRecord>,
}

impl ThresholdGroup {
    pub fn contains(&self, r: f64) -> bool {
        r >= self.lower && (r < self.upper || (self.upper_inclusive && r <= self.upper))
    }

    pub fn label(&self) -> String {
        if self.lower == self.upper {
            format!("[{}]", self.lower)
        } else {
            let close = if self.upper_inclusive { ']' } else { ')' };
            format!("[{}, {}{close}", self.lower, self.upper)
        }
    }
}

/// Partitions records into `[t_i, t_{i+1})` intervals. The last threshold
/// opens a terminal closed interval `[t_k, 1]`, which is the hard-verified
/// class `{1}` when `t_k = 1`. Records below `t_0` land in a leading
/// `[0, t_0)` group when `t_0 > 0`.
pub fn bucket_by_thresholds(
    records: &[VerificationRecord],
    thresholds: &[f64],
) -> Result<Vec<ThresholdGroup>, VerifyError> {
    let ok = !thresholds.is_empty()
        && thresholds.iter().all(|t| (0.0..=1.0).contains(t))
        && thresholds.windows(2).all(|w| w[0] < w[1]);
    if !ok {
        return Err(VerifyError::Thresholds(thresholds.to_vec()));
    }
    let mut groups = Vec::new();
    if thresholds[0] > 0.0 {
        groups.push(ThresholdGroup {
            lower: 0.0,
            upper: thresholds[0],
            upper_inclusive: false,
            records: Vec::new(),
        });
    }
    for w in thresholds.windows(2) {
        groups.push(ThresholdGroup {
            lower: w[0],
            upper: w[1],
            upper_inclusive: false,
            records: Vec::new(),
        });
    }
    groups.push(ThresholdGroup {
        lower: *thresholds.last().unwrap(),
        upper: 1.0,
        upper_inclusive: true,
        records: Vec::new(),
    });
    for rec in records {
        let group = groups
            .iter_mut()
            .find(|g| g.contains(rec.r))
            .expect("groups cover [0, 1]");
        group.records.push(rec.clone());
    }
    Ok(groups)
}

/// Records with `r >= threshold`, in input order.
pub fn filter_at_least(records: &[VerificationRecord], threshold: f64) -> Vec<VerificationRecord> {
    records.iter().filter(|r| r.r >= threshold).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::fixtures::meta;
    use crate::trajectory::RolloutStage;

    fn with_patch(id: &str, patch: Option<&str>) -> Trajectory {
        let mut t = Trajectory::new(id, RolloutStage::First, meta());
        t.patch = patch.map(str::to_string);
        t
    }

    const FIRST: &str = "--- a/f.py\n+++ b/f.py\n@@ -1,4 +1,4 @@\n-old1\n-old2\n+new1\n+new2\n x\n y\n";

    #[test]
    fn pair_buckets() {
        let first = with_patch("t1", Some(FIRST));
        let same = with_patch("t2", Some(FIRST));
        let rec = verify_pair(&first, &same, IdentityMode::WithPath).unwrap();
        assert_eq!((rec.r, rec.bucket), (1.0, Bucket::Hard));

        let other = with_patch("t2", Some("--- a/g.py\n+++ b/g.py\n@@ -1,0 +1,1 @@\n+zzz\n"));
        let rec = verify_pair(&first, &other, IdentityMode::WithPath).unwrap();
        assert_eq!((rec.r, rec.bucket), (0.0, Bucket::Unverified));

        // two of the four reference lines plus unrelated additions
        let half = with_patch(
            "t2",
            Some("--- a/f.py\n+++ b/f.py\n@@ -1,2 +1,4 @@\n-old1\n+new1\n+p\n+q\n x\n"),
        );
        let rec = verify_pair(&first, &half, IdentityMode::WithPath).unwrap();
        assert_eq!((rec.r, rec.bucket), (0.5, Bucket::Soft));
    }

    #[test]
    fn pair_errors() {
        let first = with_patch("t1", Some(FIRST));
        assert_eq!(
            verify_pair(&first, &with_patch("t2", None), IdentityMode::WithPath),
            Err(VerifyError::Unpatched("t2".into()))
        );
        let empty = with_patch("t1", Some(""));
        assert!(matches!(
            verify_pair(&empty, &first, IdentityMode::WithPath),
            Err(VerifyError::Patch { source: PatchError::EmptyReference, .. })
        ));
    }

    fn recs(rs: &[f64]) -> Vec<VerificationRecord> {
        rs.iter()
            .enumerate()
            .map(|(i, r)| VerificationRecord::new(format!("t{i}"), *r))
            .collect()
    }

    #[test]
    fn four_threshold_bucketing() {
        let groups = bucket_by_thresholds(&recs(&[0.0, 0.3, 0.6, 1.0]), &DEFAULT_THRESHOLDS).unwrap();
        let counts: Vec<usize> = groups.iter().map(|g| g.records.len()).collect();
        assert_eq!(counts, vec![1, 1, 1, 0, 1]);
        assert_eq!(groups[4].label(), "[1]");
        assert_eq!(groups[4].records[0].r, 1.0);
        assert_eq!(groups[0].label(), "[0, 0.25)");
    }

    #[test]
    fn bucketing_edge_cases() {
        let groups = bucket_by_thresholds(&[], &DEFAULT_THRESHOLDS).unwrap();
        assert!(groups.iter().all(|g| g.records.is_empty()));
        let split = bucket_by_thresholds(&recs(&[0.0, 0.5, 1.0]), &[0.0, 1.0]).unwrap();
        assert_eq!(split.len(), 2);
        assert_eq!(split[0].records.len(), 2);
        assert_eq!(split[1].records.len(), 1);
        assert!(bucket_by_thresholds(&[], &[0.5, 0.25]).is_err());
        assert!(bucket_by_thresholds(&[], &[0.0, 1.5]).is_err());
        let shifted = bucket_by_thresholds(&recs(&[0.1, 0.6]), &[0.5]).unwrap();
        assert_eq!(shifted[0].records.len(), 1);
        assert_eq!(shifted[1].records.len(), 1);
    }

    #[test]
    fn filter_examples() {
        let rs = recs(&[0.0, 0.3, 0.6, 1.0]);
        assert_eq!(filter_at_least(&rs, 0.0), rs);
        let hard = filter_at_least(&rs, 1.0);
        assert_eq!(hard.len(), 1);
        assert_eq!(hard[0].bucket, Bucket::Hard);
        let half: Vec<f64> = filter_at_least(&rs, 0.5).iter().map(|r| r.r).collect();
        assert_eq!(half, vec![0.6, 1.0]);
    }
}
