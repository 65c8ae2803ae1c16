//! Opinions from evidence, projection, and the two fusion operators.
//!
//! `cargo run --example opinion_fusion`

use sl_trust::opinion::dirichlet_pdf;
use sl_trust::{average_fuse, cumulative_fuse, BinomialOpinion, Domain, EvidenceRecord, Opinion};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 8 successes and 2 failures of a binary proposition
    let w = BinomialOpinion::from_evidence(8.0, 2.0, 0.5);
    println!("binomial from (r=8, s=2): b={:.3} d={:.3} u={:.3} P={:.3}", w.b, w.d, w.u, w.project());

    let domain = Domain::new(["left", "center", "right"])?;
    let base = domain.uniform_base_rate();
    let a = EvidenceRecord::new(domain.clone(), vec![6.0, 3.0, 1.0], base.clone())?.to_opinion();
    let b = Opinion::new(domain.clone(), vec![0.1, 0.5, 0.2], 0.2, base.clone())?;
    println!("A = {}", serde_json::to_string(&a)?);
    println!("B = {}", serde_json::to_string(&b)?);
    println!("P(A) = {:?}", a.project());

    let cum = cumulative_fuse(&a, &b)?;
    let avg = average_fuse(&[a.clone(), b.clone()])?;
    println!("cumulative: belief {:?} u={:.4}", cum.belief(), cum.uncertainty());
    println!("average:    belief {:?} u={:.4}", avg.belief(), avg.uncertainty());

    // cumulative fusion is evidence addition
    let summed = a.to_evidence()?.add(&b.to_evidence()?)?;
    println!("evidence sum {:?} -> u={:.4}", summed.evidence(), summed.to_opinion().uncertainty());

    let ev = a.to_evidence()?;
    println!("Dirichlet density of A at (0.6, 0.3, 0.1): {:.4}", dirichlet_pdf(&[0.6, 0.3, 0.1], &ev)?);
    Ok(())
}
