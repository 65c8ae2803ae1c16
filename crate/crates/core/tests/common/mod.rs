//! Random fixtures and pipeline invariant checks shared by the property
//! tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use sl_trust::misbehavior::{classify, degree_of_conflict, revise_trust, revision_weights};
use sl_trust::{detect, BinomialOpinion, DetectParams, Domain, Opinion, ReportedOpinion, TrustRecord, TrustStore};

fn normalize(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// Opinion over an indexed domain of `k` values. Roughly one in eight is
/// dogmatic and base rates are random.
pub fn opinion(k: usize) -> impl Strategy<Value = Opinion> {
    (vec(0.001f64..1.0, k + 1), vec(0.05f64..1.0, k), prop::bool::weighted(0.125)).prop_map(move |(w, a, dogmatic)| {
        let mut mass = normalize(&w);
        if dogmatic {
            mass[k] = 0.0;
            mass = normalize(&mass);
        }
        let u = mass[k];
        // renormalize belief so the sum is exactly 1 − u
        let belief: Vec<f64> = mass[..k].iter().map(|b| b * (1.0 - u) / mass[..k].iter().sum::<f64>()).collect();
        Opinion::new(Domain::indexed(k).unwrap(), belief, u, normalize(&a)).unwrap()
    })
}

pub fn non_dogmatic(k: usize) -> impl Strategy<Value = Opinion> {
    opinion(k).prop_filter("non-dogmatic", |o| o.uncertainty() > 1e-6)
}

pub fn opinion_pair() -> impl Strategy<Value = (Opinion, Opinion)> {
    (2usize..=10).prop_flat_map(|k| (opinion(k), opinion(k)))
}

/// 2..=8 reports on one domain, a threshold, and trust projections.
pub fn report_set() -> impl Strategy<Value = (Vec<ReportedOpinion>, f64)> {
    (2usize..=5).prop_flat_map(|k| (vec(non_dogmatic(k), 2..=8), prop_oneof![0.0f64..=0.5, 0.0f64..=1.0])).prop_map(
        |(ops, theta)| {
            let reports = ops.into_iter().enumerate().map(|(i, o)| ReportedOpinion::new(format!("v{i}"), o)).collect();
            (reports, theta)
        },
    )
}

pub fn trust_opinion() -> impl Strategy<Value = BinomialOpinion> {
    (vec(0.0f64..1.0, 3), 0.0f64..=1.0).prop_filter_map("non-degenerate", |(w, a)| {
        let s: f64 = w.iter().sum();
        (s > 1e-9).then(|| {
            let b = w[0] / s;
            let d = w[1] / s;
            BinomialOpinion { b, d, u: 1.0 - b - d, a }
        })
    })
}

pub fn store_for(reports: &[ReportedOpinion], trust: &[BinomialOpinion]) -> TrustStore {
    let mut store = TrustStore::new();
    for (r, t) in reports.iter().zip(trust) {
        let mut rec = TrustRecord::new(r.agent.clone());
        rec.trust = *t;
        store.insert(rec);
    }
    store
}

pub fn check_dc(a: &Opinion, b: &Opinion) -> Result<(), TestCaseError> {
    let ab = degree_of_conflict(a, b).unwrap();
    let ba = degree_of_conflict(b, a).unwrap();
    prop_assert_eq!(ab, ba);
    prop_assert!((0.0..=1.0).contains(&ab), "DC = {}", ab);
    prop_assert!(degree_of_conflict(a, a).unwrap() == 0.0);
    Ok(())
}

pub fn check_partition(reports: &[ReportedOpinion], theta: f64) -> Result<(), TestCaseError> {
    let res = detect(reports, &TrustStore::new(), &DetectParams::new(theta)).unwrap();
    let all: BTreeSet<_> = reports.iter().map(|r| r.agent.clone()).collect();
    prop_assert!(res.honest.is_disjoint(&res.misbehaving));
    let union: BTreeSet<_> = res.honest.union(&res.misbehaving).cloned().collect();
    prop_assert_eq!(&union, &all);
    prop_assert_eq!(res.conflicts.keys().cloned().collect::<BTreeSet<_>>(), all);
    for (agent, dc) in &res.conflicts {
        prop_assert_eq!(res.misbehaving.contains(agent), *dc > theta);
    }
    Ok(())
}

pub fn check_revision_bounds(reports: &[ReportedOpinion], theta: f64) -> Result<(), TestCaseError> {
    let res = detect(reports, &TrustStore::new(), &DetectParams::new(theta)).unwrap();
    for (agent, rw) in &res.revision_weights {
        prop_assert!(res.misbehaving.contains(agent));
        prop_assert!(*rw >= 0.0 && *rw <= res.max_conflict, "RW {} outside [0, {}]", rw, res.max_conflict);
    }
    // also with every agent declared misbehaving, where DC < AC occurs
    let everyone: BTreeSet<_> = res.conflicts.keys().cloned().collect();
    if let Ok(rev) = revision_weights(&res.conflicts, &everyone) {
        for rw in rev.weights.values() {
            prop_assert!(*rw >= 0.0 && *rw <= rev.max_conflict);
        }
    }
    Ok(())
}

pub fn check_revised_validity(
    reports: &[ReportedOpinion],
    theta: f64,
    trust: &[BinomialOpinion],
) -> Result<(), TestCaseError> {
    let store = store_for(reports, trust);
    let res = detect(reports, &store, &DetectParams::new(theta)).unwrap();
    let mut revised = store.clone();
    if revise_trust(&res.conflicts, &res.misbehaving, &mut revised).is_err() {
        prop_assert!(res.degenerate);
        return Ok(());
    }
    for rec in revised.iter() {
        prop_assert!(rec.validate().is_ok(), "{:?}", rec);
        let t = rec.trust;
        prop_assert!(t.b >= 0.0 && t.d >= 0.0 && t.u >= 0.0);
        prop_assert!((t.b + t.d + t.u - 1.0).abs() <= 1e-9);
        let before = store.get(&rec.agent_id).unwrap();
        if res.misbehaving.contains(&rec.agent_id) {
            prop_assert!(rec.projected() <= before.projected() + 1e-12);
        } else {
            prop_assert_eq!(rec, before);
        }
    }
    Ok(())
}

pub fn check_theta_monotone(
    reports: &[ReportedOpinion],
    reference: &Opinion,
    t1: f64,
    t2: f64,
) -> Result<(), TestCaseError> {
    let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
    let strict = classify(reports, reference, lo).unwrap();
    let loose = classify(reports, reference, hi).unwrap();
    prop_assert!(loose.misbehaving.is_subset(&strict.misbehaving));
    prop_assert!(strict.honest.is_subset(&loose.honest));
    Ok(())
}

/// Reports plus a reference opinion on the same domain.
pub fn reports_with_reference() -> impl Strategy<Value = (Vec<ReportedOpinion>, Opinion, f64, f64)> {
    (2usize..=5).prop_flat_map(|k| (vec(opinion(k), 1..=8), opinion(k), 0.0f64..=1.0, 0.0f64..=1.0)).prop_map(
        |(ops, reference, t1, t2)| {
            let reports = ops.into_iter().enumerate().map(|(i, o)| ReportedOpinion::new(format!("v{i}"), o)).collect();
            (reports, reference, t1, t2)
        },
    )
}

/// Independent evidence-space oracle for cumulative fusion: add Dirichlet
/// evidence, map back. Dogmatic operands are handled by the limit rule.
pub fn cumulative_oracle(a: &Opinion, b: &Opinion) -> (Vec<f64>, f64) {
    const W: f64 = 2.0;
    let (ua, ub) = (a.uncertainty(), b.uncertainty());
    if ua > 0.0 && ub > 0.0 {
        let k = a.belief().len();
        let r: Vec<f64> = (0..k).map(|x| W * a.belief()[x] / ua + W * b.belief()[x] / ub).collect();
        let total: f64 = W + r.iter().sum::<f64>();
        (r.iter().map(|v| v / total).collect(), W / total)
    } else if ua == 0.0 && ub == 0.0 {
        (a.belief().iter().zip(b.belief()).map(|(x, y)| 0.5 * x + 0.5 * y).collect(), 0.0)
    } else if ua == 0.0 {
        (a.belief().to_vec(), 0.0)
    } else {
        (b.belief().to_vec(), 0.0)
    }
}

/// Two-source averaging fusion written directly from its belief-space form:
/// `b = (b_A u_B + b_B u_A)/(u_A + u_B)`, `u = 2 u_A u_B/(u_A + u_B)`.
pub fn average_oracle(a: &Opinion, b: &Opinion) -> (Vec<f64>, f64) {
    let (ua, ub) = (a.uncertainty(), b.uncertainty());
    if ua == 0.0 && ub == 0.0 {
        return (a.belief().iter().zip(b.belief()).map(|(x, y)| 0.5 * (x + y)).collect(), 0.0);
    }
    let s = ua + ub;
    let belief = a.belief().iter().zip(b.belief()).map(|(x, y)| (x * ub + y * ua) / s).collect();
    (belief, 2.0 * ua * ub / s)
}

pub fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Outcome of scanning a trace for the one-pseudonym-per-topic rule.
#[derive(Debug, Default)]
pub struct SybilScan {
    /// Registration requests made while the agent already held (or had been
    /// flagged for) a pseudonym on the topic.
    pub attempts: usize,
    /// Such requests without a Sybil flag in the same cycle.
    pub unflagged: Vec<String>,
    /// Times an agent held two accepted pseudonyms on one topic at once.
    pub double_active: usize,
}

pub fn scan_sybil(trace: &sl_trust::broker::SimulationTrace) -> SybilScan {
    use std::collections::BTreeMap;
    let mut scan = SybilScan::default();
    let mut active: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
    let mut flagged: BTreeSet<(String, String)> = BTreeSet::new();
    let mut revoked: BTreeSet<String> = BTreeSet::new();
    let mut expected = Vec::new();
    let mut seen = BTreeSet::new();
    let pseudonym = |e: &sl_trust::broker::TraceEvent| e.payload["pseudonym"].as_str().unwrap_or_default().to_string();
    for e in &trace.events {
        // revoked agents are refused before any Sybil check
        if e.event_type == "revoke" {
            let agent = e.agent.as_ref().map(|a| a.0.clone()).unwrap_or_default();
            active.retain(|(a, _), _| *a != agent);
            revoked.insert(agent);
            continue;
        }
        let (Some(agent), Some(topic)) = (&e.agent, &e.topic) else { continue };
        if revoked.contains(&agent.0) {
            continue;
        }
        let key = (agent.0.clone(), topic.clone());
        match e.event_type.as_str() {
            "register_request" => {
                if flagged.contains(&key) || active.get(&key).is_some_and(|s| !s.is_empty()) {
                    scan.attempts += 1;
                    expected.push((e.cycle, key.clone(), pseudonym(e)));
                }
            }
            "register" => {
                let set = active.entry(key).or_default();
                set.insert(pseudonym(e));
                if set.len() > 1 {
                    scan.double_active += 1;
                }
            }
            "expire" => {
                if let Some(set) = active.get_mut(&key) {
                    set.remove(&pseudonym(e));
                }
            }
            "sybil_flag" => {
                seen.insert((e.cycle, key.clone(), pseudonym(e)));
                active.remove(&key);
                flagged.insert(key);
            }
            _ => {}
        }
    }
    for x in expected {
        if !seen.contains(&x) {
            scan.unflagged.push(format!("{x:?}"));
        }
    }
    scan
}
