//! Synthetic large population: per-report detection rates over error rate
//! and θ, and the resulting batch elimination probabilities.
//!
//! `cargo run --release --example large_scale -- [reports_per_cell]`

use sl_trust::scenarios::{elimination_model, large_scale_synthetic, LargeScaleConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reports: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(10_000);
    let cfg = LargeScaleConfig { reports_per_cell: reports, ..LargeScaleConfig::default() };
    let rows = large_scale_synthetic(&cfg, 2024)?;
    println!("error  theta   p_tp   p_fp   p_dm(n=15)  p_wb(n=15)");
    let fmt = |p: Option<f64>| p.map(|v| format!("{v:.3}")).unwrap_or_else(|| "  -  ".into());
    for r in &rows {
        let elim = match (r.p_tp, r.p_fp) {
            (Some(tp), Some(fp)) => Some(elimination_model(tp, fp, 3, 15)?),
            _ => None,
        };
        println!(
            "{:.2}   {:.2}   {}  {}  {:>10}  {:>10}",
            r.error_rate,
            r.theta,
            fmt(r.p_tp),
            fmt(r.p_fp),
            fmt(elim.map(|e| e.p_dm)),
            fmt(elim.map(|e| e.p_wb)),
        );
    }
    Ok(())
}
