//! One detection run step by step: conflict graph, dominant clusters,
//! reference opinion, classification and trust revision.
//!
//! `cargo run --example detect_misbehavior -- [theta]`

use std::collections::BTreeSet;

use sl_trust::misbehavior::{build_conflict_graph, dominant_components, revise_trust};
use sl_trust::{detect, DetectParams, Domain, Opinion, ReportedOpinion, TrustStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let theta: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.15);
    let d = Domain::new(["near", "mid", "far"])?;
    let base = d.uniform_base_rate();
    let op = |b: [f64; 3], u: f64| Opinion::new(d.clone(), b.to_vec(), u, base.clone());
    let reports = vec![
        ReportedOpinion::new("veh-a", op([0.15, 0.6, 0.1], 0.15)?),
        ReportedOpinion::new("veh-b", op([0.1, 0.65, 0.1], 0.15)?),
        ReportedOpinion::new("veh-c", op([0.2, 0.4, 0.1], 0.3)?),
        ReportedOpinion::new("rsu", op([0.05, 0.15, 0.65], 0.15)?),
    ];

    let graph = build_conflict_graph(&reports, theta)?;
    for e in graph.conflict_list() {
        println!("DC({}, {}) = {:.3}{}", e.a, e.b, e.dc, if e.dc <= theta { "  linked" } else { "" });
    }
    for comp in dominant_components(&graph) {
        let names: Vec<_> = comp.iter().map(|&i| graph.vertices()[i].as_str()).collect();
        println!("dominant cluster {names:?}");
    }

    let mut store = TrustStore::new();
    for r in &reports {
        let rec = store.entry(&r.agent);
        *rec = sl_trust::trust::reward_success(rec, 20.0)?;
    }
    let result = detect(&reports, &store, &DetectParams::new(theta))?;
    println!("reference belief {:?}", result.reference.belief());
    println!("honest {:?}", result.honest);
    println!("misbehaving {:?}", result.misbehaving);
    println!("MC={:.3} AC={:.3} RW={:?}", result.max_conflict, result.avg_conflict, result.revision_weights);

    let flagged: BTreeSet<_> = result.misbehaving.clone();
    revise_trust(&result.conflicts, &flagged, &mut store)?;
    for rec in store.iter() {
        println!("{}: P={:.3}", rec.agent_id, rec.projected());
    }
    Ok(())
}
