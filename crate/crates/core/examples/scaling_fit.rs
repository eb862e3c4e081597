//! Fits y = c - a·x^(-b) to the seven self-hosted scaling points, checks
//! each point held out, and prices two performance targets.
//!
//!     cargo run -p softverify --example scaling_fit

use softverify::costmodel::cost_to_match;
use softverify::scaling::{fit_power_law, leave_one_out, predict, vllm_reference_points, FitOptions, Weighting};

fn main() {
    let points = vllm_reference_points();
    for weighting in [Weighting::Uniform, Weighting::InverseVariance] {
        let opts = FitOptions { weighting, ..FitOptions::default() };
        let fit = fit_power_law(&points, &opts).expect("seven points fit");
        println!(
            "{weighting:?}: c={:.2} a={:.2} b={:.4}  R²={:.4}  MAE={:.3}",
            fit.c, fit.a, fit.b, fit.r_squared, fit.mean_abs_error
        );
        let loo = leave_one_out(&points, &opts).unwrap();
        for (p, r) in points.iter().zip(loo) {
            println!("  x={:<6} y={:<6} fit={:6.2} held-out residual {r:+.3}", p.x, p.y, predict(&fit, p.x).unwrap());
        }
        for target in [50.0, 50.5] {
            match cost_to_match(&fit, target) {
                Ok(d) => println!("  reaching {target}% costs about ${d:.0}"),
                Err(e) => println!("  reaching {target}%: {e}"),
            }
        }
    }
}
