//! Runs the broker on a JSON scenario and summarizes the trace.
//!
//! `cargo run --example broker_simulation -- configs/broker_intersection.json`
//! Without an argument a random population is generated.

use std::collections::BTreeMap;

use sl_trust::broker::{replay_verdicts, run_cycles, synthetic_config, SimConfig, SyntheticParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => SimConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => synthetic_config(11, SyntheticParams { faulty_fraction: 0.3, ..SyntheticParams::default() }),
    };
    let out = run_cycles(&cfg, cfg.cycles, cfg.seed)?;

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &out.trace.events {
        *counts.entry(e.event_type.as_str()).or_default() += 1;
    }
    println!("{} cycles, {} events", cfg.cycles, out.trace.events.len());
    for (kind, n) in &counts {
        println!("  {kind:<18} {n}");
    }
    for e in out.trace.of_type("sybil_flag") {
        println!(
            "cycle {:>3}: Sybil flag on {} ({})",
            e.cycle,
            e.agent.as_ref().unwrap(),
            e.topic.as_deref().unwrap_or("-")
        );
    }
    for (agent, cycle) in out.trace.revocations() {
        println!("cycle {cycle:>3}: {agent} revoked");
    }
    println!("final trust:");
    for p in &out.profiles {
        let trust = out.trust.projected(&p.true_id).map(|t| format!("{t:.3}")).unwrap_or_else(|| "-".into());
        println!(
            "  {:<8} {:<16} {:<60} P={trust}",
            p.true_id.as_str(),
            format!("{:?}", p.role),
            format!("{:?}", p.behavior)
        );
    }
    let replay = replay_verdicts(&out.trace)?;
    println!("replayed {} verdicts, {} mismatches", replay.verified, replay.mismatches.len());
    Ok(())
}
