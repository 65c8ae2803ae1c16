mod common;

use common::*;
use proptest::prelude::*;

use sl_trust::opinion::dirichlet_pdf;
use sl_trust::trust::{age_trust, discount_opinion, reward_success, AgingParams};
use sl_trust::{average_fuse, cumulative_fuse, DiscountContext, EvidenceRecord, Opinion, TrustRecord};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn dc_is_symmetric_and_bounded((a, b) in opinion_pair()) {
        check_dc(&a, &b)?;
    }

    #[test]
    fn classification_partitions_agents((reports, theta) in report_set()) {
        check_partition(&reports, theta)?;
    }

    #[test]
    fn revision_weights_stay_in_bounds((reports, theta) in report_set()) {
        check_revision_bounds(&reports, theta)?;
    }

    #[test]
    fn revised_trust_is_valid(
        (reports, theta) in report_set(),
        trust in proptest::collection::vec(trust_opinion(), 8),
    ) {
        check_revised_validity(&reports, theta, &trust)?;
    }

    #[test]
    fn misbehaving_set_shrinks_as_theta_grows((reports, reference, t1, t2) in reports_with_reference()) {
        check_theta_monotone(&reports, &reference, t1, t2)?;
    }
}

fn fusable(o: &Opinion) -> bool {
    !o.is_dogmatic() && !o.is_vacuous()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn cumulative_fusion_is_commutative_and_valid((a, b) in opinion_pair()) {
        prop_assume!(fusable(&a) && fusable(&b));
        let ab = cumulative_fuse(&a, &b).unwrap();
        let ba = cumulative_fuse(&b, &a).unwrap();
        prop_assert!(max_abs_diff(ab.belief(), ba.belief()) < 1e-12);
        prop_assert!((ab.uncertainty() - ba.uncertainty()).abs() < 1e-12);
        prop_assert!(ab.validate().is_ok());
        // fusing evidence never increases uncertainty
        prop_assert!(ab.uncertainty() <= a.uncertainty().min(b.uncertainty()) + 1e-12);
    }

    #[test]
    fn cumulative_fusion_matches_oracle((a, b) in opinion_pair()) {
        prop_assume!(fusable(&a) && fusable(&b));
        let fused = cumulative_fuse(&a, &b).unwrap();
        let (belief, u) = cumulative_oracle(&a, &b);
        prop_assert!(max_abs_diff(fused.belief(), &belief) < 1e-12);
        prop_assert!((fused.uncertainty() - u).abs() < 1e-12);
    }

    #[test]
    fn average_fusion_is_permutation_invariant(
        ops in (2usize..=6).prop_flat_map(|k| proptest::collection::vec(non_dogmatic(k), 2..=6)),
        seed in any::<u64>(),
    ) {
        let mut shuffled = ops.clone();
        let n = shuffled.len();
        shuffled.rotate_left((seed % n as u64) as usize);
        let x = average_fuse(&ops).unwrap();
        let y = average_fuse(&shuffled).unwrap();
        prop_assert!(max_abs_diff(x.belief(), y.belief()) < 1e-12);
        prop_assert!((x.uncertainty() - y.uncertainty()).abs() < 1e-12);
        prop_assert!(x.validate().is_ok());
    }

    #[test]
    fn average_fusion_of_two_matches_oracle((a, b) in opinion_pair()) {
        prop_assume!(fusable(&a) && fusable(&b));
        let fused = average_fuse(&[a.clone(), b.clone()]).unwrap();
        let (belief, u) = average_oracle(&a, &b);
        prop_assert!(max_abs_diff(fused.belief(), &belief) < 1e-12);
        prop_assert!((fused.uncertainty() - u).abs() < 1e-12);
    }

    #[test]
    fn evidence_round_trip(op in (2usize..=10).prop_flat_map(non_dogmatic)) {
        let back = Opinion::from_evidence(&op.to_evidence().unwrap());
        prop_assert!(max_abs_diff(back.belief(), op.belief()) < 1e-9);
        prop_assert!((back.uncertainty() - op.uncertainty()).abs() < 1e-9);
    }

    #[test]
    fn projection_is_a_distribution(op in (2usize..=10).prop_flat_map(opinion)) {
        let p = op.project();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn dirichlet_density_is_positive_inside_the_simplex(
        ev in proptest::collection::vec(0.0f64..20.0, 3),
        w in proptest::collection::vec(0.01f64..1.0, 3),
    ) {
        let d = sl_trust::Domain::indexed(3).unwrap();
        let rec = EvidenceRecord::new(d.clone(), ev, d.uniform_base_rate()).unwrap();
        let s: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / s).collect();
        let v = dirichlet_pdf(&p, &rec).unwrap();
        prop_assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn discounting_keeps_opinions_valid(
        op in (2usize..=6).prop_flat_map(opinion),
        trust in 0.0f64..=1.0,
        distance in 0.0f64..200.0,
        age in 0.0f64..10.0,
    ) {
        let ctx = DiscountContext { source_trust: trust, distance, age, spatial_decay: 0.99, temporal_decay: 0.95, ..DiscountContext::identity() };
        let d = discount_opinion(&op, &ctx);
        prop_assert!(d.validate().is_ok());
        prop_assert!(d.uncertainty() >= op.uncertainty() - 1e-12);
        prop_assert_eq!(discount_opinion(&op, &DiscountContext::identity()), op);
    }

    #[test]
    fn aging_moves_mass_to_uncertainty(t in trust_opinion(), p_sa in 0.5f64..=1.0) {
        let mut rec = TrustRecord::new("x".into());
        rec.trust = t;
        let aged = age_trust(&rec, AgingParams { p_sa });
        prop_assert!(aged.validate().is_ok());
        prop_assert!(aged.trust.u >= t.u - 1e-15);
        prop_assert!(aged.trust.b <= t.b && aged.trust.d <= t.d);
    }

    #[test]
    fn rewards_raise_projected_trust(t in trust_opinion(), w in 0.01f64..10.0) {
        prop_assume!(t.u > 1e-9);
        let mut rec = TrustRecord::new("x".into());
        rec.trust = t;
        let up = reward_success(&rec, w).unwrap();
        prop_assert!(up.projected() >= rec.projected() - 1e-12);
        prop_assert!(up.validate().is_ok());
    }
}
