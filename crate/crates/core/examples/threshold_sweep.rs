//! Detection rates of the intersection scenarios over a θ grid.
//!
//! `cargo run --release --example threshold_sweep -- [runs] [seed]`

use sl_trust::scenarios::{theta_grid, threshold_sweep, IntersectionConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let runs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2024);
    let rows = threshold_sweep(&theta_grid(0.0, 0.30, 0.01)?, runs, seed, &IntersectionConfig::default())?;
    println!("theta  detected  >=1 found  wrong acc.  all honest");
    for r in rows {
        println!(
            "{:.2}   {:>8.3}  {:>9.3}  {:>10.3}  {:>10.3}",
            r.theta, r.p_detected, r.p_at_least_one, r.p_wrong_accusation, r.p_all_honest
        );
    }
    Ok(())
}
