//! Per-trajectory cost under four pricing setups, and what a campaign of a
//! given size costs.
//!
//!     cargo run -p softverify --example cost_breakdown

use softverify::costmodel::{campaign_cost, reference, render_table, trajectory_cost, PricingProfile};

fn main() {
    let mut columns = Vec::new();
    for (name, usage, pricing, published) in reference::breakdown_columns() {
        let b = trajectory_cost(&usage, &pricing).expect("valid profile");
        println!("{name:<24} {:.4} (published {published})", b.total);
        columns.push((name, b));
    }
    println!("\n{}", render_table(&columns));

    for n in [400, 3000, 16_000] {
        let line: Vec<String> = columns.iter().map(|(name, b)| format!("{name}: ${:.0}", campaign_cost(n, b))).collect();
        println!("{n:>6} trajectories  {}", line.join("  "));
    }

    // Your own hardware: 0.04 GPU-hours at $1.20/h.
    let own = PricingProfile::SelfHosted { name: "local".into(), gpu_hours_per_trajectory: 0.04, gpu_rate: 1.2 };
    let b = trajectory_cost(&reference::usage_profile(), &own).unwrap();
    println!("\nlocal: ${:.4} per trajectory", b.total);
}
