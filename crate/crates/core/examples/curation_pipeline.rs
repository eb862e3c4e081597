//! Filter, rank by truncation ratio, cut into partitions and mix two
//! sources at a specialization ratio.
//!
//!     cargo run -p softverify --example curation_pipeline

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softverify::curation::{
    dedup_by_patch, filter_patch_lines, filter_tool_output, mix, order_by_truncation_ratio, partition_fixed,
    select_ordered_truncated, specialization_spec, Source, DEFAULT_MAX_MEAN_TOOL_TOKENS, DEFAULT_MAX_PATCH_LINES,
    DEFAULT_MIN_RATIO,
};
use softverify::trajectory::{strip_reasoning, Metadata, Role, RolloutStage, Step};
use softverify::{ByteQuarterCounter, Trajectory};

fn synthetic(id: String, rng: &mut ChaCha8Rng) -> Trajectory {
    let mut t = Trajectory::new(id, RolloutStage::Second, Metadata::default());
    t.push(Step::new(Role::User, "Fix the bug described in the PR."));
    for _ in 0..rng.random_range(2..30) {
        let mut s = Step::new(Role::Assistant, "a".repeat(rng.random_range(100..2000)));
        s.reasoning = Some("thinking...".into());
        t.push(s);
        t.push(Step::tool("o".repeat(rng.random_range(50..3500))));
    }
    let lines = rng.random_range(1..60);
    let mut patch = format!("--- a/m.py\n+++ b/m.py\n@@ -0,0 +1,{lines} @@\n");
    for i in 0..lines {
        patch.push_str(&format!("+v{} = {i}\n", rng.random_range(0..1000)));
    }
    t.patch = Some(patch);
    t
}

fn main() {
    let counter = ByteQuarterCounter;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pool: Vec<Trajectory> = (0..2000).map(|i| synthetic(format!("t{i:04}"), &mut rng)).collect();

    let kept = filter_patch_lines(pool, DEFAULT_MAX_PATCH_LINES);
    println!("patch <= {DEFAULT_MAX_PATCH_LINES} lines: {}", kept.len());
    let kept = filter_tool_output(kept, DEFAULT_MAX_MEAN_TOOL_TOKENS, &counter);
    println!("mean tool output <= {DEFAULT_MAX_MEAN_TOOL_TOKENS} tokens: {}", kept.len());
    let kept = dedup_by_patch(kept);
    println!("after dedup: {}", kept.len());

    let limit = 8192;
    for (i, part) in partition_fixed(order_by_truncation_ratio(kept.clone(), limit, &counter), 250).iter().enumerate() {
        println!("partition {i}: ratio {:.3} .. {:.3}", part[0].ratio, part[part.len() - 1].ratio);
    }

    let selected = select_ordered_truncated(kept, limit, &counter, DEFAULT_MIN_RATIO, 400).unwrap();
    let selected: Vec<Trajectory> = selected.iter().map(strip_reasoning).collect();
    let truncated = selected.iter().filter(|t| t.metadata.truncation.is_some()).count();
    println!("selected {} at ratio >= {DEFAULT_MIN_RATIO} ({truncated} truncated)", selected.len());

    let (repo, general) = selected.split_at(selected.len() / 2);
    for alpha in [0.0, 0.25, 0.75, 1.0] {
        let spec = specialization_spec(
            Source { label: "repo".into(), records: repo.to_vec() },
            Source { label: "general".into(), records: general.to_vec() },
            alpha,
            100,
            11,
        );
        let mixed = mix(&spec).unwrap();
        let from_repo = mixed.iter().filter(|t| repo.iter().any(|r| r.id == t.id)).count();
        println!("alpha {alpha:.2}: {from_repo}/{} from repo", mixed.len());
    }
}
