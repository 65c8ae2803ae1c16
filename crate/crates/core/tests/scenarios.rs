use approx::assert_relative_eq;
use rand::Rng;

use sl_trust::scenarios::{
    elimination_model, histogram_opinion, large_scale_synthetic, recalibrate, roc_sweep, run_intersection,
    run_intersection_grid, run_rng, theta_grid, threshold_sweep, HistogramSpec, IntersectionConfig, LargeScaleConfig,
    Scenario,
};

const SEED: u64 = 2024;

#[test]
fn histogram_uncertainty_depends_only_on_counts() {
    let spec = HistogramSpec::new(10, -4.0, 4.0).unwrap();
    assert_eq!(histogram_opinion(&[], &spec).uncertainty(), 1.0);
    let mut rng = run_rng(1, 0);
    for _ in 0..50 {
        let wide: Vec<f64> = (0..50).map(|_| rng.random_range(-10.0..10.0)).collect();
        let narrow: Vec<f64> = (0..50).map(|_| rng.random_range(-0.1..0.1)).collect();
        assert_relative_eq!(histogram_opinion(&wide, &spec).uncertainty(), 10.0 / 60.0, epsilon = 1e-12);
        assert_relative_eq!(histogram_opinion(&narrow, &spec).uncertainty(), 10.0 / 60.0, epsilon = 1e-12);
    }
    assert_relative_eq!(histogram_opinion(&[0.0; 10], &spec).uncertainty(), 0.5, epsilon = 1e-12);
}

#[test]
fn recalibration_reads_a_one_bin_shift() {
    let spec = HistogramSpec::new(10, -4.0, 4.0).unwrap();
    let w = spec.bin_width();
    let centers = spec.bin_centers();
    // symmetric triangle around bin 4, and the same shape one bin higher
    let shape = |c: usize| -> Vec<f64> {
        let mut z = Vec::new();
        for (k, n) in [(c - 1, 10), (c, 30), (c + 1, 10)] {
            z.extend(std::iter::repeat_n(centers[k], n));
        }
        z
    };
    let reference = histogram_opinion(&shape(4), &spec);
    let wrong = histogram_opinion(&shape(5), &spec);
    let r = recalibrate(&wrong, &reference, &spec).unwrap();
    assert_relative_eq!(r.offset, w, epsilon = 1e-9);
    assert_relative_eq!(r.spread_ratio, 1.0, epsilon = 1e-9);
    let same = recalibrate(&reference, &reference, &spec).unwrap();
    assert_eq!(same.offset, 0.0);
}

#[test]
fn all_honest_population_is_cleared_at_loose_thresholds() {
    let cfg = IntersectionConfig::default();
    let s = run_intersection(Scenario::AllHonest, 0.25, 1000, SEED, &cfg).unwrap();
    assert!(s.p_all_honest >= 0.99, "{}", s.p_all_honest);
    assert_eq!(s.p_detected, 0.0);
}

#[test]
fn sweep_end_points() {
    let cfg = IntersectionConfig::default();
    let rows = threshold_sweep(&[0.0, 0.30], 1000, SEED, &cfg).unwrap();
    // every fluctuation is a conflict at θ = 0
    assert_eq!(rows[0].p_all_honest, 0.0);
    // the mechanism is insensitive at θ = 0.3
    assert!(rows[1].p_detected < 0.1, "{}", rows[1].p_detected);
    for r in &rows {
        for p in [r.p_detected, r.p_at_least_one, r.p_wrong_accusation, r.p_all_honest] {
            assert!((0.0..=1.0).contains(&p));
        }
    }
}

#[test]
fn grid_runs_share_samples_across_thresholds() {
    let cfg = IntersectionConfig::default();
    let grid = run_intersection_grid(Scenario::CollaborativeAttack, &[0.12, 0.15, 0.2], 300, 11, &cfg).unwrap();
    for row in &grid {
        assert_eq!(row, &run_intersection(Scenario::CollaborativeAttack, row.theta, 300, 11, &cfg).unwrap());
    }
    assert!(run_intersection(Scenario::AllHonest, 0.15, 0, 11, &cfg).is_err());
}

#[test]
fn roc_points_fall_with_theta() {
    let cfg = IntersectionConfig::default();
    let thetas = theta_grid(0.05, 0.30, 0.025).unwrap();
    let rows = roc_sweep(&[(1.0, 0.75)], &thetas, 1000, SEED, &cfg).unwrap();
    // Monte-Carlo slack: different θ can pick a different reference per run
    for w in rows.windows(2) {
        assert!(w[1].fp <= w[0].fp + 0.01, "FP {} -> {} at theta {}", w[0].fp, w[1].fp, w[1].theta);
        assert!(w[1].tp <= w[0].tp + 0.01, "TP {} -> {} at theta {}", w[0].tp, w[1].tp, w[1].theta);
    }
}

#[test]
fn larger_calibration_errors_are_easier_to_catch() {
    let cfg = IntersectionConfig::default();
    let rows = roc_sweep(&[(0.7, 0.75), (1.0, 0.75)], &[0.12, 0.15, 0.18], 1000, SEED, &cfg).unwrap();
    let (small, large) = rows.split_at(3);
    for (s, l) in small.iter().zip(large) {
        assert!(l.tp > s.tp, "theta {}: {} vs {}", s.theta, l.tp, s.tp);
    }
}

#[test]
fn unfaulted_rsu_matches_the_all_honest_false_alarm_rate() {
    let cfg = IntersectionConfig::default();
    let roc = roc_sweep(&[(cfg.true_mean, cfg.true_std)], &[0.15], 1000, SEED, &cfg).unwrap();
    let honest = run_intersection(Scenario::AllHonest, 0.15, 1000, SEED, &cfg).unwrap();
    assert!((roc[0].fp - honest.false_positive_rate).abs() < 0.03, "{} vs {}", roc[0].fp, honest.false_positive_rate);
}

#[test]
fn elimination_edge_cases() {
    assert_eq!(elimination_model(0.0, 0.0, 3, 15).unwrap().p_dm, 0.0);
    assert_eq!(elimination_model(1.0, 0.0, 3, 1).unwrap().p_dm, 1.0);
    assert!(elimination_model(1.2, 0.0, 3, 15).is_err());
}

#[test]
fn large_scale_without_misbehavior_has_no_positives() {
    let cfg = LargeScaleConfig {
        misbehaving_fraction: 0.0,
        error_rates: vec![0.0],
        thetas: vec![0.1, 0.2],
        reports_per_cell: 500,
        ..LargeScaleConfig::default()
    };
    let rows = large_scale_synthetic(&cfg, SEED).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r.p_tp, None);
        assert!((0.0..=1.0).contains(&r.p_fp.unwrap()));
    }
    assert_eq!(rows, large_scale_synthetic(&cfg, SEED).unwrap());
    assert!(large_scale_synthetic(&LargeScaleConfig { misbehaving_fraction: 1.5, ..cfg }, SEED).is_err());
}
