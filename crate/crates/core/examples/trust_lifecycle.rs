//! Trust of one agent over time: rewards, partially dependent accumulation,
//! aging, and discounting of its reports.
//!
//! `cargo run --example trust_lifecycle`

use sl_trust::trust::{accumulate_partially_dependent, age_trust, discount_opinion, reward_success, AgingParams};
use sl_trust::{BinomialOpinion, DiscountContext, Domain, Opinion, TrustRecord, TrustStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rec = TrustRecord::new("rsu-17".into());
    let aging = AgingParams { p_sa: 0.99 };
    for cycle in 0..10 {
        rec = age_trust(&rec, aging);
        // first cooperation with a partner counts fully, repeats count 1 - λ
        let weight = if cycle == 0 { 1.0 } else { 1.0 - rec.dependence };
        rec = reward_success(&rec, weight)?;
        println!("cycle {cycle}: b={:.3} u={:.3} P={:.3}", rec.trust.b, rec.trust.u, rec.projected());
    }

    let mine = BinomialOpinion::from_evidence(10.0, 0.0, 0.5);
    let theirs = BinomialOpinion::from_evidence(10.0, 0.0, 0.5);
    for lambda in [0.0, 0.5, 1.0] {
        let t = accumulate_partially_dependent(&mine, &theirs, lambda, lambda)?;
        println!("two 10-success records, λ={lambda}: evidence r={:.1}", t.to_evidence()?.0);
    }

    let report = Opinion::new(Domain::binary(), vec![0.8, 0.1], 0.1, vec![0.5, 0.5])?;
    let ctx = DiscountContext {
        source_trust: rec.projected(),
        distance: 40.0,
        spatial_decay: 0.995,
        age: 2.0,
        temporal_decay: 0.9,
        ..DiscountContext::identity()
    };
    let d = discount_opinion(&report, &ctx);
    println!(
        "P_dis={:.3}: belief {:?} -> {:?}, u {:.3} -> {:.3}",
        ctx.p_dis(),
        report.belief(),
        d.belief(),
        report.uncertainty(),
        d.uncertainty()
    );

    let mut store = TrustStore::new();
    store.insert(rec);
    print!("{}", store.to_json_lines());
    Ok(())
}
