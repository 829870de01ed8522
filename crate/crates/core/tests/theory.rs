mod common;

use fkl_core::solver::policy_row;
use fkl_core::theory::{
    check_bregman_identity, check_conjugate_gradient, fenchel_young_check, fd_hessian, find_sign_indefinite,
    hessian_formula, integral_representation, kl_row, mean_value_curve, mean_value_point, perf_diff_bound,
    phi, phi_conjugate, run_theory_suite, strong_convexity_gap, Extended, TheorySuiteConfig, SIGN_THRESHOLD,
};
use rand::Rng as _;

fn probe(g: &mut fkl_core::rng::Rng, arms: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let q = common::simplex_point(g, arms, 0.05);
    let r: Vec<f64> = (0..arms).map(|_| g.random::<f64>()).collect();
    (q, r, common::log_uniform(g, 0.1, 50.0))
}

#[test]
fn conjugate_gradient_converges_at_second_order() {
    let mut g = common::rng(4);
    for _ in 0..20 {
        let (q, r, _) = probe(&mut g, 4);
        let eta = 2.0;
        let coarse = check_conjugate_gradient(&q, eta, &r, 1e-2).unwrap();
        let fine = check_conjugate_gradient(&q, eta, &r, 5e-3).unwrap();
        if coarse > 1e-9 {
            let ratio = coarse / fine;
            assert!((2.5..=6.0).contains(&ratio), "{ratio}");
        }
    }
}

#[test]
fn hessian_matches_finite_differences() {
    let mut g = common::rng(5);
    for _ in 0..100 {
        let arms = g.random_range(2..=6);
        let (q, r, eta) = probe(&mut g, arms);
        let m = hessian_formula(&r, &q, eta).unwrap();
        let fd = fd_hessian(&r, &q, eta, 1e-5).unwrap();
        assert!((&m - &fd).amax() <= 1e-4 * m.amax(), "eta {eta}");
        assert!((&m - m.transpose()).amax() <= 1e-14);
        let eig = m.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-12 * m.amax()));
    }
}

#[test]
fn bregman_identity_and_primal_form() {
    let mut g = common::rng(6);
    for _ in 0..200 {
        let (q, r, eta) = probe(&mut g, 5);
        let rp: Vec<f64> = (0..5).map(|_| g.random::<f64>()).collect();
        let (dual, primal) = check_bregman_identity(&r, &rp, &q, eta).unwrap();
        assert!((dual - primal).abs() <= 1e-8 * dual.abs().max(1e-12), "{dual} {primal}");
        // Independent primal form: sum_a q_a psi(pi'_a / pi_a - 1) / eta.
        let (pi, _) = policy_row(&r, &q, eta).unwrap();
        let (pp, _) = policy_row(&rp, &q, eta).unwrap();
        let direct: f64 = q
            .iter()
            .zip(pi.iter().zip(&pp))
            .map(|(&qa, (&p, &m))| qa * (m / p - 1.0 - (m / p).ln()))
            .sum::<f64>()
            / eta;
        assert!((direct - primal).abs() <= 1e-9 * direct.abs().max(1e-10));
    }
}

#[test]
fn pessimistic_bound_holds_and_rejects_optimism() {
    let mut g = common::rng(7);
    for _ in 0..2000 {
        let arms = g.random_range(2..=8);
        let (q, r, eta) = probe(&mut g, arms);
        let r_hat: Vec<f64> = r.iter().map(|x| x - g.random::<f64>()).collect();
        assert!(perf_diff_bound(&q, &r, &r_hat, eta).unwrap().holds());
    }
    let err = perf_diff_bound(&[0.5, 0.5], &[0.2, 0.4], &[0.3, 0.1], 2.0).unwrap_err();
    assert!(matches!(err, fkl_core::Error::PessimismViolated { a: 0, .. }));
}

#[test]
fn suboptimality_integral_representations() {
    let mut g = common::rng(8);
    for _ in 0..30 {
        let (q, r, eta) = probe(&mut g, 4);
        let eta = eta.min(10.0);
        let r_hat: Vec<f64> = r.iter().map(|x| x - g.random::<f64>() / eta.max(1.0)).collect();
        let curve = mean_value_curve(&q, &r, &r_hat, eta, 2001).unwrap();
        let scale = curve.subopt.abs().max(1e-12);
        assert!((curve.quadrature() - curve.subopt).abs() <= 1e-5 * scale + 1e-12);
        let direct = integral_representation(&q, &r, &r_hat, eta, 2001).unwrap();
        assert!((direct - curve.subopt).abs() <= 1e-5 * scale + 1e-12);
        assert!(curve.brackets(1e-12));
    }
}

#[test]
fn mean_value_at_zero_matches_closed_form() {
    let q = [0.2, 0.3, 0.5];
    let r = [0.7, 0.1, 0.4];
    let r_hat = [0.5, 0.05, 0.1];
    let eta = 3.0;
    let (f0, _) = mean_value_point(&q, &r, &r_hat, eta, 0.0).unwrap();
    let (pi, _) = policy_row(&r, &q, eta).unwrap();
    let w: Vec<f64> = pi.iter().zip(&q).map(|(p, q)| p * p / q).collect();
    let gap: Vec<f64> = r.iter().zip(&r_hat).map(|(a, b)| a - b).collect();
    let z: f64 = w.iter().sum();
    let m: f64 = w.iter().zip(&gap).map(|(a, b)| a * b).sum::<f64>() / z;
    let expected = 0.5 * eta * w.iter().zip(&gap).map(|(a, b)| a * (b - m).powi(2)).sum::<f64>();
    assert!((f0 - expected).abs() <= 1e-14);
}

#[test]
fn sign_witness_is_reproducible() {
    let witness = find_sign_indefinite(1, 1000).unwrap().expect("witness");
    let (_, fp) = mean_value_point(&witness.ref_row, &witness.r, &witness.r_hat, witness.eta, witness.u_positive)
        .unwrap();
    assert_eq!(fp, witness.f_prime_positive);
    assert!(fp > SIGN_THRESHOLD);
    assert!((witness.fd_check - fp).abs() <= 1e-4 * fp.abs().max(1.0));
    assert!(witness.r.iter().zip(&witness.r_hat).all(|(a, b)| b <= a));
}

#[test]
fn fenchel_young_inequality_with_equality_on_the_graph() {
    for &y in &[-5.0, -1.0, -0.2, 0.0, 0.3, 0.9, 0.999] {
        let z = y / (1.0 - y);
        let slack = phi(y) + match phi_conjugate(z) {
            Extended::Finite(v) => v,
            Extended::Infinite => unreachable!(),
        } - y * z;
        assert!(slack.abs() <= 1e-10 * (1.0 + z.abs()), "{y}");
        assert!(fenchel_young_check(y, z));
    }
    assert_eq!(phi_conjugate(-1.0), Extended::Infinite);
    assert!(fenchel_young_check(0.5, -3.0));
}

#[test]
fn strong_convexity_lower_bound() {
    let mut g = common::rng(10);
    for _ in 0..1000 {
        let arms = g.random_range(2..=6);
        let q = common::simplex_point(&mut g, arms, 0.01);
        let pi = common::simplex_point(&mut g, arms, 0.01);
        let mu = common::simplex_point(&mut g, arms, 0.01);
        assert!(strong_convexity_gap(&q, &pi, &mu) >= -1e-12);
        // Cross-check the Bregman rewrite against the raw KL difference.
        let linear: f64 = q.iter().zip(pi.iter().zip(&mu)).map(|(&a, (&p, &m))| -a / p * (m - p)).sum();
        let raw = kl_row(&q, &mu) - kl_row(&q, &pi) - linear;
        let alpha = q.iter().copied().fold(f64::INFINITY, f64::min);
        let tv = 0.5 * pi.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let gap = strong_convexity_gap(&q, &pi, &mu);
        assert!((raw - 2.0 * alpha * tv * tv - gap).abs() <= 1e-9 * raw.abs().max(1.0));
    }
}

#[test]
fn full_suite_passes() {
    let report = run_theory_suite(TheorySuiteConfig::new(50, 3)).unwrap();
    for check in &report.checks {
        assert!(check.passed, "{check:?}");
    }
    assert!(report.passed);
    assert!(report.sign_witness.is_some());
}
