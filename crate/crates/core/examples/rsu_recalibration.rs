//! Faulty RSU: how often it is caught, and the corrected calibration the
//! broker derives from the reference opinion.
//!
//! `cargo run --release --example rsu_recalibration -- [theta] [runs]`

use sl_trust::scenarios::intersection::{adjudicate_run, sample_run, AGENT_RSU};
use sl_trust::scenarios::{recalibrate, run_intersection, run_rng, IntersectionConfig, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let theta: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.15);
    let runs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let cfg = IntersectionConfig::default();

    // a single run in detail
    let sample = sample_run(Scenario::FaultyRsu, &cfg, &mut run_rng(2024, 0));
    let verdict = adjudicate_run(&sample, theta)?;
    let rsu = sample.reports.iter().find(|r| r.agent.as_str() == AGENT_RSU).expect("RSU reports");
    println!("run 0: misbehaving {:?}", verdict.misbehaving);
    let fix = recalibrate(&rsu.opinion, &verdict.reference, &cfg.histogram)?;
    let (mu, sigma) = fix.apply(cfg.rsu_fault.0, cfg.rsu_fault.1);
    println!("run 0: offset {:.3}, spread ratio {:.3} -> mu={mu:.3} sigma={sigma:.3}", fix.offset, fix.spread_ratio);

    let stats = run_intersection(Scenario::FaultyRsu, theta, runs, 2024, &cfg)?;
    println!("{runs} runs: RSU flagged {:.3}, honest flagged {:.3}", stats.p_rsu_flagged, stats.false_positive_rate);
    if let Some((mu, sigma)) = stats.recalibrated_mean {
        println!("mean recalibration: mu={mu:.3} m, sigma={sigma:.3} m (true {} / {})", cfg.true_mean, cfg.true_std);
    }
    Ok(())
}
