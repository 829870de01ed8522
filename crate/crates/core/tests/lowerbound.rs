mod common;

use fkl_core::lowerbound::{
    build_contextual_hard, build_two_arm_pair, closed_form_hard_policy, estimator_risks, minimax_risk,
    two_arm_floor, two_arm_kl, two_arm_lambda, Enumeration, EstimatorKind, HardFamily, RiskConfig, SignPattern,
};
use fkl_core::estimators::greedy_tabular;
use fkl_core::{optimal_policy, solve_lambda, Policy, SubOptEvaluator};
use rand::Rng as _;

fn risk_config(n: usize, trials: usize, seed: u64) -> RiskConfig {
    RiskConfig { n, trials, seed, delta: 0.1, sampled_patterns: 16 }
}

#[test]
fn closed_form_policy_matches_solver() {
    let mut g = common::rng(31);
    for _ in 0..100 {
        let s = g.random_range(1..=4);
        let k = g.random_range(1..=3);
        let eta = common::log_uniform(&mut g, 0.1, 20.0);
        let sa = (2 * s * k) as f64;
        let n = (16.0 * sa).max(4.0 * eta * eta * sa) as usize + 1 + g.random_range(0..10_000);
        let family = HardFamily::new(s, k, n, eta).unwrap();
        let v = SignPattern::from_index(s, k, g.random::<u64>());
        let inst = build_contextual_hard(&family, &v).unwrap();
        let solved = optimal_policy(&inst, eta).unwrap();
        let closed = closed_form_hard_policy(&family, &v).unwrap();
        assert!(solved.policy.probs().max_abs_diff(closed.probs()) <= 1e-10);
        for row in 0..s {
            let total: f64 = closed.row(row).iter().sum();
            assert!((total - 1.0).abs() <= 1e-15);
        }
    }
}

#[test]
fn weak_regularization_is_uniform() {
    let family = HardFamily::new(2, 2, 1000, 1e-6).unwrap();
    let closed = closed_form_hard_policy(&family, &SignPattern::from_index(2, 2, 9)).unwrap();
    assert!(closed.probs().as_slice().iter().all(|p| (p - 0.25).abs() <= 1e-7));
}

#[test]
fn two_arm_shared_lambda() {
    for &(c, eta) in &[(0.1, 2.0), (0.05, 1.0), (0.2, 20.0), (1e-9, 3.0)] {
        let (acute, grave) = build_two_arm_pair(c, eta).unwrap();
        for inst in [&acute, &grave] {
            let lambda = solve_lambda(inst.reward_mean().row(0), inst.pi_ref().row(0), eta).unwrap();
            assert!((lambda - two_arm_lambda(c, eta)).abs() <= 1e-12);
        }
    }
    assert!((two_arm_lambda(0.0, 4.0) - 0.75).abs() <= 1e-15);
    for &c in &[0.01, 0.1, 0.2, 0.24] {
        assert!(two_arm_kl(c) <= 16.0 * c * c);
    }
    assert!(build_two_arm_pair(0.25, 1.0).is_err());
}

#[test]
fn two_arm_floor_matches_grid_minimum() {
    for &c in &[0.05, 0.1] {
        for &eta in &[1.0, 5.0, 20.0] {
            let (acute, grave) = build_two_arm_pair(c, eta).unwrap();
            let ea = SubOptEvaluator::new(&acute, eta).unwrap();
            let eg = SubOptEvaluator::new(&grave, eta).unwrap();
            let points = 10_000;
            let best = (1..=points)
                .map(|i| {
                    let p = i as f64 / (points + 1) as f64;
                    let pi = Policy::from_rows(vec![vec![p, 1.0 - p]]).unwrap();
                    ea.eval(&pi).unwrap() + eg.eval(&pi).unwrap()
                })
                .fold(f64::INFINITY, f64::min);
            let floor = two_arm_floor(c, eta);
            assert!((best - floor).abs() <= 1e-4, "c={c} eta={eta}: {best} vs {floor}");
        }
    }
}

#[test]
fn uniform_risk_closed_form() {
    let eta = 2.0;
    let family = HardFamily::new(1, 1, 4096, eta).unwrap();
    let report = &estimator_risks(&family, &risk_config(256, 20, 3), &[EstimatorKind::Uniform]).unwrap()[0];
    assert_eq!(report.enumeration, Enumeration::Exhaustive);
    // Optimal arm mass (1 + omega)/2 and J(pi) = <r, pi> - KL(q || pi)/eta.
    let (c, w) = (family.c, family.omega());
    let opt = [(1.0 - w) / 2.0, (1.0 + w) / 2.0];
    let value = (0.5 - c) * opt[0] + (0.5 + c) * opt[1]
        - (0.5 * (0.5 / opt[0]).ln() + 0.5 * (0.5 / opt[1]).ln()) / eta;
    let expected = value - 0.5;
    assert!((report.mean_risk - expected).abs() <= 1e-12 + 3.0 * report.mean_stderr);
    assert!((report.max_risk - expected).abs() <= 1e-12);
}

#[test]
fn pessimistic_risk_sandwich() {
    let eta = 2.0;
    let family = HardFamily::new(1, 2, 16_384, eta).unwrap();
    let delta = 0.1;
    let report = &estimator_risks(&family, &risk_config(16_384, 50, 4), &[EstimatorKind::FklPcb]).unwrap()[0];
    // gap <= 2b, b^2 <= 32 log^2 / (n q) on the count event, so
    // SubOpt <= 2 eta sum pi*^2/q (2b)^2 <= 256 eta C^2 A log^2 / n per context.
    let (sa, n) = (4.0f64, 16_384.0);
    let log = (2.0 * sa / delta).ln();
    let coverage = 1.0 + family.omega();
    let bound = 256.0 * eta * coverage * coverage * sa * log * log / n;
    for p in &report.patterns {
        assert!(p.mean >= 0.0);
        assert!(p.mean <= bound, "{} > {bound}", p.mean);
    }
}

#[test]
fn risk_symmetry_under_sign_flip() {
    let eta = 2.0;
    let family = HardFamily::new(1, 1, 4096, eta).unwrap();
    let cfg = risk_config(2048, 400, 5);
    let report = minimax_risk(&family, &cfg, "greedy", |data, inst| greedy_tabular(data, inst.meta(), eta)).unwrap();
    let (a, b) = (report.patterns[0], report.patterns[1]);
    let spread = 3.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() <= spread, "{a:?} {b:?}");
}

#[test]
fn large_families_are_sampled() {
    let family = HardFamily::new(4, 2, 100_000, 1.0).unwrap();
    let report = &estimator_risks(&family, &risk_config(64, 2, 6), &[EstimatorKind::Oracle]).unwrap()[0];
    assert_eq!(report.enumeration, Enumeration::Sampled);
    assert_eq!(report.patterns.len(), 16);
    assert!(report.max_risk.abs() <= 1e-12);
}

#[test]
fn best_risk_scales_with_eta() {
    let kinds = [EstimatorKind::FklPcb, EstimatorKind::Greedy, EstimatorKind::Uniform];
    let best = |eta: f64| -> f64 {
        let family = HardFamily::new(1, 2, 16_384, eta).unwrap();
        estimator_risks(&family, &risk_config(16_384, 200, 7), &kinds)
            .unwrap()
            .iter()
            .map(|r| r.mean_risk)
            .fold(f64::INFINITY, f64::min)
    };
    let ratio = best(4.0) / best(2.0);
    assert!((1.5..=2.5).contains(&ratio), "{ratio}");
}

#[test]
fn estimator_names_round_trip() {
    for kind in EstimatorKind::ALL {
        assert_eq!(kind.name().parse::<EstimatorKind>().unwrap(), kind);
    }
    assert!("bogus".parse::<EstimatorKind>().is_err());
}
