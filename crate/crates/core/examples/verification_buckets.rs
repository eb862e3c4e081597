//! Groups verification scores into threshold intervals and keeps the ones
//! above a cut.
//!
//!     cargo run -p softverify --example verification_buckets

use softverify::verification::{bucket_by_thresholds, filter_at_least, DEFAULT_THRESHOLDS};
use softverify::VerificationRecord;

fn main() {
    let scores = [0.0, 0.1, 0.25, 0.4, 0.5, 0.5, 0.66, 0.8, 0.95, 1.0, 1.0, 1.0];
    let records: Vec<VerificationRecord> = scores
        .iter()
        .enumerate()
        .map(|(i, r)| VerificationRecord::new(format!("t2-{i:02}"), *r))
        .collect();

    for group in bucket_by_thresholds(&records, &DEFAULT_THRESHOLDS).expect("valid thresholds") {
        let ids: Vec<&str> = group.records.iter().map(|r| r.trajectory_id.as_str()).collect();
        println!("{:<12} {:>2}  {}", group.label(), group.records.len(), ids.join(" "));
    }

    let kept = filter_at_least(&records, 0.5);
    println!("\nr >= 0.5 keeps {} of {}", kept.len(), records.len());
    for r in &kept {
        println!("  {} r={:.2} {:?}", r.trajectory_id, r.r, r.bucket);
    }
}
