//! ROC points of the faulty-RSU scenario for several calibration errors,
//! written as CSV.
//!
//! `cargo run --release --example roc_curve -- [runs] > roc.csv`

use sl_trust::scenarios::{roc_sweep, theta_grid, to_csv, IntersectionConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let faults = [(0.7, 0.75), (0.8, 0.75), (0.9, 0.75), (1.0, 0.75)];
    let rows = roc_sweep(&faults, &theta_grid(0.0, 0.30, 0.005)?, runs, 2024, &IntersectionConfig::default())?;
    print!("{}", to_csv(&rows)?);
    for (mu, _) in faults {
        let best = rows
            .iter()
            .filter(|r| r.mu_est == mu && r.fp <= 0.1)
            .max_by(|a, b| a.tp.total_cmp(&b.tp))
            .expect("grid reaches low FP");
        eprintln!("mu_est={mu}: best TP {:.3} at FP {:.3} (theta {})", best.tp, best.fp, best.theta);
    }
    Ok(())
}
