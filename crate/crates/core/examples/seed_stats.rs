//! Seed summaries, signal-to-noise between two runs, and how many seeds a
//! given effect needs.
//!
//!     cargo run -p softverify --example seed_stats

use softverify::stats::{
    confidence_tier, scaling_seed_rows, seeds_required, snr, snr_from_summaries, summarize, PoolingFactor, SeedGroup,
    Summary,
};

fn main() {
    let rows = scaling_seed_rows();
    for (n, values) in &rows {
        let s = summarize(&SeedGroup::new(n.to_string(), *values)).unwrap();
        println!("{n:>6} samples  mean {:.2}  std {:.2}", s.mean, s.std);
    }

    // Neighbouring scale points are often within noise of each other.
    for w in rows.windows(2) {
        let a = SeedGroup::new(w[0].0.to_string(), w[0].1);
        let b = SeedGroup::new(w[1].0.to_string(), w[1].1);
        let s = snr(&a, &b).unwrap();
        println!("{:>6} vs {:<6} snr {s:.2} {:?}", w[0].0, w[1].0, confidence_tier(s));
    }

    let sera = Summary { mean: 30.00, std: 1.41, n: 3 };
    let smith = Summary { mean: 25.27, std: 0.61, n: 3 };
    let s = snr_from_summaries(&sera, &smith);
    println!("\nheadline pair: snr {s:.2} {:?}", confidence_tier(s));

    for effect in [0.5, 1.0, 2.0, 3.0] {
        let lit = seeds_required(effect, 1.2, PoolingFactor::Literal).unwrap();
        let two = seeds_required(effect, 1.2, PoolingFactor::TwoGroup).unwrap();
        println!("effect {effect:.1} at std 1.2: {lit} seeds (literal), {two} (two-group)");
    }
}
