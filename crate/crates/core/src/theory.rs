//! Numeric checks of the convex-analytic facts behind the fast rate.
//!
//! Everything here works on a single context: a reference row `q`, an
//! inverse temperature `eta`, and reward vectors. With
//! `h(pi) = eta^{-1} KL(q || pi)` restricted to the simplex, the conjugate
//! `h*(r) = max_pi <r, pi> - h(pi)` has gradient `pi_r`, the solver's
//! optimizer. Gradients of `h` are taken from the continuation `-q / (eta pi)`
//! and only ever paired with tangent directions.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng, Rng};
use crate::solver::{policy_row, psi_from_offset, psi_gap_row};

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `KL(q || pi)`.
pub fn kl_row(q: &[f64], pi: &[f64]) -> f64 {
    q.iter()
        .zip(pi)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

/// Conjugate value together with its maximizer.
pub fn h_star_with_policy(ref_row: &[f64], eta: f64, r: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (pi, root) = policy_row(r, ref_row, eta)?;
    // log(q / pi) = log(eta (lambda - r)) is exact on the optimizer.
    let kl: f64 = ref_row
        .iter()
        .zip(r)
        .filter(|(&q, _)| q > 0.0)
        .map(|(&q, &ra)| q * (eta * (root.shift + (root.max_reward - ra))).ln())
        .sum();
    Ok((dot(r, &pi) - kl / eta, pi))
}

pub fn h_star(ref_row: &[f64], eta: f64, r: &[f64]) -> Result<f64> {
    h_star_with_policy(ref_row, eta, r).map(|(v, _)| v)
}

/// Value, gradient and Hessian of the conjugate at one reward vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugateProbe {
    pub ref_row: Vec<f64>,
    pub eta: f64,
    pub r: Vec<f64>,
    pub h_star: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
}

impl ConjugateProbe {
    pub fn new(ref_row: &[f64], eta: f64, r: &[f64]) -> Result<Self> {
        let (h_star, grad) = h_star_with_policy(ref_row, eta, r)?;
        let m = hessian_from_policy(ref_row, eta, &grad);
        let hess = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        Ok(ConjugateProbe {
            ref_row: ref_row.to_vec(),
            eta,
            r: r.to_vec(),
            h_star,
            grad,
            hess,
        })
    }
}

fn perturbed(r: &[f64], a: usize, step: f64) -> Vec<f64> {
    let mut out = r.to_vec();
    out[a] += step;
    out
}

/// Max deviation between a central-difference gradient of `h*` and `pi_r`.
pub fn check_conjugate_gradient(ref_row: &[f64], eta: f64, r: &[f64], fd_step: f64) -> Result<f64> {
    let (_, pi) = h_star_with_policy(ref_row, eta, r)?;
    let mut worst = 0.0f64;
    for (a, &p) in pi.iter().enumerate() {
        let plus = h_star(ref_row, eta, &perturbed(r, a, fd_step))?;
        let minus = h_star(ref_row, eta, &perturbed(r, a, -fd_step))?;
        worst = worst.max(((plus - minus) / (2.0 * fd_step) - p).abs());
    }
    Ok(worst)
}

/// `(B_{h*}(r, r'), B_h(pi_{r'}, pi_r))`, each from its own ingredients.
pub fn check_bregman_identity(
    r: &[f64],
    r_prime: &[f64],
    ref_row: &[f64],
    eta: f64,
) -> Result<(f64, f64)> {
    let (value, pi) = h_star_with_policy(ref_row, eta, r)?;
    let (value_prime, pi_prime) = h_star_with_policy(ref_row, eta, r_prime)?;
    let diff: Vec<f64> = r.iter().zip(r_prime).map(|(a, b)| a - b).collect();
    let dual = value - value_prime - dot(&pi_prime, &diff);
    let linear: f64 = ref_row
        .iter()
        .zip(&pi)
        .zip(&pi_prime)
        .map(|((&q, &p), &pp)| -q / p * (pp - p))
        .sum();
    let primal = (kl_row(ref_row, &pi_prime) - kl_row(ref_row, &pi) - linear) / eta;
    Ok((dual, primal))
}

fn hessian_from_policy(ref_row: &[f64], eta: f64, pi: &[f64]) -> DMatrix<f64> {
    let n = pi.len();
    let h_inv: Vec<f64> = pi.iter().zip(ref_row).map(|(&p, &q)| eta * p * p / q).collect();
    let total: f64 = h_inv.iter().sum();
    DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { h_inv[i] } else { 0.0 };
        diag - h_inv[i] * h_inv[j] / total
    })
}

/// `H^{-1} - H^{-1} 1 1^T H^{-1} / (1^T H^{-1} 1)` with `H = eta^{-1} diag(q / pi_r^2)`.
pub fn hessian_formula(r: &[f64], ref_row: &[f64], eta: f64) -> Result<DMatrix<f64>> {
    let (pi, _) = policy_row(r, ref_row, eta)?;
    Ok(hessian_from_policy(ref_row, eta, &pi))
}

/// Central differences of `pi_r`, i.e. of the conjugate gradient.
pub fn fd_hessian(r: &[f64], ref_row: &[f64], eta: f64, step: f64) -> Result<DMatrix<f64>> {
    let n = r.len();
    let mut out = DMatrix::zeros(n, n);
    for b in 0..n {
        let (plus, _) = policy_row(&perturbed(r, b, step), ref_row, eta)?;
        let (minus, _) = policy_row(&perturbed(r, b, -step), ref_row, eta)?;
        for a in 0..n {
            out[(a, b)] = (plus[a] - minus[a]) / (2.0 * step);
        }
    }
    Ok(out)
}

/// Max entrywise deviation from finite differences, relative to the largest entry.
pub fn hessian_fd_error(r: &[f64], ref_row: &[f64], eta: f64, step: f64) -> Result<f64> {
    let m = hessian_formula(r, ref_row, eta)?;
    let fd = fd_hessian(r, ref_row, eta, step)?;
    Ok((&m - fd).amax() / m.amax().max(f64::MIN_POSITIVE))
}

/// `max |M H P - P|` with `P = I - 1 1^T / A`.
pub fn projection_error(r: &[f64], ref_row: &[f64], eta: f64) -> Result<f64> {
    let (pi, _) = policy_row(r, ref_row, eta)?;
    let n = pi.len();
    let m = hessian_from_policy(ref_row, eta, &pi);
    let h = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            ref_row[i] / (eta * pi[i] * pi[i])
        } else {
            0.0
        }
    });
    let p = DMatrix::from_fn(n, n, |i, j| (i == j) as u8 as f64 - 1.0 / n as f64);
    Ok((&m * h * &p - &p).amax())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfDiffCheck {
    pub subopt: f64,
    pub bound: f64,
}

impl PerfDiffCheck {
    pub fn holds(&self) -> bool {
        self.subopt <= self.bound * (1.0 + 1e-12) + 1e-15
    }
}

fn pessimistic_gap(r: &[f64], r_hat: &[f64]) -> Result<Vec<f64>> {
    if r.len() != r_hat.len() {
        return Err(Error::Shape("reward vectors differ in length".into()));
    }
    r.iter()
        .zip(r_hat)
        .enumerate()
        .map(|(a, (&true_r, &est))| {
            if est > true_r {
                Err(Error::PessimismViolated {
                    a,
                    estimate: est,
                    reward: true_r,
                })
            } else {
                Ok(true_r - est)
            }
        })
        .collect()
}

/// Suboptimality of the `r_hat` optimizer against the self-bounding bound
/// `2 eta sum_a pi*(a)^2 / q(a) (r(a) - r_hat(a))^2`.
pub fn perf_diff_bound(ref_row: &[f64], r: &[f64], r_hat: &[f64], eta: f64) -> Result<PerfDiffCheck> {
    let gap = pessimistic_gap(r, r_hat)?;
    let (opt, _) = policy_row(r, ref_row, eta)?;
    let (est, _) = policy_row(r_hat, ref_row, eta)?;
    let subopt = psi_gap_row(ref_row, &opt, &est, eta);
    let bound = 2.0
        * eta
        * opt
            .iter()
            .zip(ref_row)
            .zip(&gap)
            .map(|((&p, &q), &g)| p * p / q * g * g)
            .sum::<f64>();
    Ok(PerfDiffCheck { subopt, bound })
}

/// `F(u) = (eta/2) sum_a (pi_u^2/q)(g - m)^2` and `F'(u)` at one `pi_u`.
fn mean_value_terms(ref_row: &[f64], pi: &[f64], gap: &[f64], eta: f64) -> (f64, f64) {
    let weights: Vec<f64> = pi.iter().zip(ref_row).map(|(&p, &q)| p * p / q).collect();
    let z: f64 = weights.iter().sum();
    let m = dot(&weights, gap) / z;
    let f = 0.5 * eta * weights.iter().zip(gap).map(|(w, g)| w * (g - m).powi(2)).sum::<f64>();
    let f_prime = -eta
        * eta
        * weights
            .iter()
            .zip(pi.iter().zip(ref_row))
            .zip(gap)
            .map(|((w, (p, q)), g)| w * (p / q) * (g - m).powi(3))
            .sum::<f64>();
    (f, f_prime)
}

fn interpolated_rewards(r: &[f64], r_hat: &[f64], u: f64) -> Vec<f64> {
    r.iter().zip(r_hat).map(|(a, b)| (1.0 - u) * a + u * b).collect()
}

/// `(F(u), F'(u))` along `r_u = (1 - u) r + u r_hat`.
pub fn mean_value_point(ref_row: &[f64], r: &[f64], r_hat: &[f64], eta: f64, u: f64) -> Result<(f64, f64)> {
    let gap: Vec<f64> = r.iter().zip(r_hat).map(|(a, b)| a - b).collect();
    let (pi, _) = policy_row(&interpolated_rewards(r, r_hat, u), ref_row, eta)?;
    Ok(mean_value_terms(ref_row, &pi, &gap, eta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanValueCurve {
    pub u_grid: Vec<f64>,
    pub f_values: Vec<f64>,
    pub f_prime_values: Vec<f64>,
    pub subopt: f64,
}

impl MeanValueCurve {
    /// `min F <= SubOpt <= max F + tol`.
    pub fn brackets(&self, tol: f64) -> bool {
        let lo = self.f_values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.f_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lo <= self.subopt + tol && self.subopt <= hi + tol
    }

    /// Largest `|F'(u) - (F(u+h) - F(u-h)) / 2h|` over interior grid points.
    pub fn max_derivative_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..self.u_grid.len().saturating_sub(1) {
            let fd = (self.f_values[i + 1] - self.f_values[i - 1])
                / (self.u_grid[i + 1] - self.u_grid[i - 1]);
            worst = worst.max((fd - self.f_prime_values[i]).abs());
        }
        worst
    }

    /// Trapezoid rule for `int_0^1 2u F(u) du`, which represents SubOpt.
    pub fn quadrature(&self) -> f64 {
        self.u_grid
            .windows(2)
            .zip(self.f_values.windows(2))
            .map(|(u, f)| (u[1] - u[0]) * (u[0] * f[0] + u[1] * f[1]))
            .sum()
    }
}

/// Evaluates `F` and `F'` on a uniform grid of `grid_size >= 2` points on `[0, 1]`.
pub fn mean_value_curve(
    ref_row: &[f64],
    r: &[f64],
    r_hat: &[f64],
    eta: f64,
    grid_size: usize,
) -> Result<MeanValueCurve> {
    if grid_size < 2 {
        return Err(Error::ParameterOutOfRange("grid needs both endpoints".into()));
    }
    if r.len() != r_hat.len() || r.len() != ref_row.len() {
        return Err(Error::Shape("reward vectors and reference row differ".into()));
    }
    let last = (grid_size - 1) as f64;
    let u_grid: Vec<f64> = (0..grid_size).map(|i| i as f64 / last).collect();
    let mut f_values = Vec::with_capacity(grid_size);
    let mut f_prime_values = Vec::with_capacity(grid_size);
    for &u in &u_grid {
        let (f, fp) = mean_value_point(ref_row, r, r_hat, eta, u)?;
        f_values.push(f);
        f_prime_values.push(fp);
    }
    let (opt, _) = policy_row(r, ref_row, eta)?;
    let (est, _) = policy_row(r_hat, ref_row, eta)?;
    Ok(MeanValueCurve {
        u_grid,
        f_values,
        f_prime_values,
        subopt: psi_gap_row(ref_row, &opt, &est, eta),
    })
}

/// Trapezoid rule for `int_0^1 u <r_hat - r, d pi_u / du> du`, with the
/// policy derivative `-eta (pi_u^2 / q)(g - E_mu g)` taken in closed form.
pub fn integral_representation(
    ref_row: &[f64],
    r: &[f64],
    r_hat: &[f64],
    eta: f64,
    grid_size: usize,
) -> Result<f64> {
    let gap: Vec<f64> = r.iter().zip(r_hat).map(|(a, b)| a - b).collect();
    let last = (grid_size.max(2) - 1) as f64;
    let values = (0..=last as usize)
        .map(|i| {
            let u = i as f64 / last;
            let (pi, _) = policy_row(&interpolated_rewards(r, r_hat, u), ref_row, eta)?;
            let w: Vec<f64> = pi.iter().zip(ref_row).map(|(&p, &q)| p * p / q).collect();
            let m = dot(&w, &gap) / w.iter().sum::<f64>();
            let dpi: Vec<f64> = w.iter().zip(&gap).map(|(wa, g)| -eta * wa * (g - m)).collect();
            let direction: Vec<f64> = gap.iter().map(|g| -g).collect();
            Ok(u * dot(&direction, &dpi))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.windows(2).map(|v| 0.5 * (v[0] + v[1]) / last).sum())
}

/// An instance with pessimistic `r_hat` on which `F'` turns positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignWitness {
    pub ref_row: Vec<f64>,
    pub r: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub eta: f64,
    pub u_positive: f64,
    pub f_prime_positive: f64,
    /// A point on the same instance where `F'` is negative, if one was found.
    pub u_negative: Option<f64>,
    /// Central difference of `F` at `u_positive`.
    pub fd_check: f64,
}

/// Threshold separating a signed derivative from numerical zero.
pub const SIGN_THRESHOLD: f64 = 1e-8;

/// Random search over 3-armed instances with `r_hat <= r`.
pub fn find_sign_indefinite(seed: u64, budget: usize) -> Result<Option<SignWitness>> {
    const ARMS: usize = 3;
    const GRID: usize = 41;
    for trial in 0..budget {
        let mut rng = seeded_rng(derive_seed(seed, &[trial as u64]));
        let ref_row = random_ref_row(&mut rng, ARMS);
        let r: Vec<f64> = (0..ARMS).map(|_| rng.random::<f64>()).collect();
        let r_hat: Vec<f64> = r.iter().map(|x| x - rng.random::<f64>()).collect();
        let eta = log_uniform(&mut rng, 0.1, 50.0);
        let mut positive: Option<(f64, f64)> = None;
        let mut negative = None;
        for i in 1..GRID - 1 {
            let u = i as f64 / (GRID - 1) as f64;
            let (_, fp) = mean_value_point(&ref_row, &r, &r_hat, eta, u)?;
            if fp > SIGN_THRESHOLD && positive.is_none_or(|(_, best)| fp > best) {
                positive = Some((u, fp));
            }
            if fp < -SIGN_THRESHOLD && negative.is_none() {
                negative = Some(u);
            }
        }
        if let Some((u, fp)) = positive {
            let step = 1e-5;
            let (f_plus, _) = mean_value_point(&ref_row, &r, &r_hat, eta, u + step)?;
            let (f_minus, _) = mean_value_point(&ref_row, &r, &r_hat, eta, u - step)?;
            return Ok(Some(SignWitness {
                ref_row,
                r,
                r_hat,
                eta,
                u_positive: u,
                f_prime_positive: fp,
                u_negative: negative,
                fd_check: (f_plus - f_minus) / (2.0 * step),
            }));
        }
    }
    Ok(None)
}

/// Extended-real value of `phi*`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Extended {
    Finite(f64),
    Infinite,
}

/// `phi(y) = -y - log(1 - y)` on `y < 1`.
pub fn phi(y: f64) -> f64 {
    psi_from_offset(-y)
}

/// `phi*(z) = z - log(1 + z)` for `z > -1`, `+inf` otherwise.
pub fn phi_conjugate(z: f64) -> Extended {
    if z > -1.0 {
        Extended::Finite(psi_from_offset(z))
    } else {
        Extended::Infinite
    }
}

/// `phi(y) + phi*(z) - y z`, or `None` when the right side is infinite.
pub fn fenchel_young_slack(y: f64, z: f64) -> Option<f64> {
    match phi_conjugate(z) {
        Extended::Finite(c) => Some(phi(y) + c - y * z),
        Extended::Infinite => None,
    }
}

pub const FENCHEL_YOUNG_TOL: f64 = 1e-12;

pub fn fenchel_young_check(y: f64, z: f64) -> bool {
    y < 1.0 && fenchel_young_slack(y, z).is_none_or(|s| s >= -FENCHEL_YOUNG_TOL)
}

/// `KL(q||mu) - KL(q||pi) - <-q/pi, mu - pi> - 2 alpha TV(mu, pi)^2`.
pub fn strong_convexity_gap(ref_row: &[f64], pi: &[f64], mu: &[f64]) -> f64 {
    let alpha = ref_row.iter().copied().fold(f64::INFINITY, f64::min);
    let tv = 0.5 * pi.iter().zip(mu).map(|(a, b)| (a - b).abs()).sum::<f64>();
    // The first three terms combine into sum_a q psi(mu / pi).
    let bregman: f64 = ref_row
        .iter()
        .zip(pi.iter().zip(mu))
        .map(|(&q, (&p, &m))| q * psi_from_offset((m - p) / p))
        .sum();
    bregman - 2.0 * alpha * tv * tv
}

fn log_uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn random_ref_row(rng: &mut Rng, arms: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..arms).map(|_| 0.05 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn random_interior(rng: &mut Rng, arms: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..arms).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| (x / total).max(1e-12)).collect()
}

/// One randomly drawn single-context probe.
#[derive(Clone, Debug)]
struct Probe {
    ref_row: Vec<f64>,
    eta: f64,
    r: Vec<f64>,
    r_hat: Vec<f64>,
}

fn draw_probe(rng: &mut Rng) -> Probe {
    let arms = rng.random_range(2..=8);
    let ref_row = random_ref_row(rng, arms);
    let eta = log_uniform(rng, 0.1, 50.0);
    let r: Vec<f64> = (0..arms).map(|_| rng.random::<f64>()).collect();
    let r_hat = r.iter().map(|x| x - rng.random::<f64>()).collect();
    Probe {
        ref_row,
        eta,
        r,
        r_hat,
    }
}

/// Sizes of each randomized batch in the theory suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheorySuiteConfig {
    pub probes: usize,
    pub seed: u64,
    pub pessimistic_probes: usize,
    pub fenchel_young_pairs: usize,
    pub strong_convexity_probes: usize,
    pub mean_value_grid: usize,
}

impl TheorySuiteConfig {
    pub fn new(probes: usize, seed: u64) -> Self {
        TheorySuiteConfig {
            probes,
            seed,
            pessimistic_probes: 10_000,
            fenchel_young_pairs: 100_000,
            strong_convexity_probes: 10_000,
            mean_value_grid: 1001,
        }
    }
}

/// Outcome of one family of checks: the worst observed statistic against its tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    /// `"max"` when `worst <= tolerance` passes, `"min"` when `worst >= tolerance` passes.
    pub sense: String,
    pub passed: bool,
}

impl CheckOutcome {
    fn at_most(name: &str, cases: usize, worst: f64, tolerance: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            cases,
            worst,
            tolerance,
            sense: "max".into(),
            passed: worst <= tolerance,
        }
    }

    fn at_least(name: &str, cases: usize, worst: f64, tolerance: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            cases,
            worst,
            tolerance,
            sense: "min".into(),
            passed: worst >= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub config: TheorySuiteConfig,
    pub checks: Vec<CheckOutcome>,
    pub sign_witness: Option<SignWitness>,
    pub passed: bool,
}

/// Check identifiers; each batch draws from its own derived stream.
const STREAM_PROBES: u64 = 1;
const STREAM_PESSIMISM: u64 = 2;
const STREAM_FENCHEL: u64 = 3;
const STREAM_CONVEXITY: u64 = 4;

/// Runs every check and collects the worst case of each.
pub fn run_theory_suite(cfg: TheorySuiteConfig) -> Result<TheoryReport> {
    let mut gradient = 0.0f64;
    let mut bregman = 0.0f64;
    let mut bregman_min = f64::INFINITY;
    let mut hessian = 0.0f64;
    let mut projection = 0.0f64;
    let mut bracket_excess = f64::NEG_INFINITY;
    let mut derivative = 0.0f64;
    for i in 0..cfg.probes {
        let mut rng = seeded_rng(derive_seed(cfg.seed, &[STREAM_PROBES, i as u64]));
        let p = draw_probe(&mut rng);
        gradient = gradient.max(check_conjugate_gradient(&p.ref_row, p.eta, &p.r, 1e-5)?);
        let r_prime: Vec<f64> = (0..p.r.len()).map(|_| rng.random::<f64>()).collect();
        let (dual, primal) = check_bregman_identity(&p.r, &r_prime, &p.ref_row, p.eta)?;
        bregman = bregman.max((dual - primal).abs() / dual.abs().max(primal.abs()).max(1e-300));
        bregman_min = bregman_min.min(dual.min(primal));
        hessian = hessian.max(hessian_fd_error(&p.r, &p.ref_row, p.eta, 1e-4)?);
        projection = projection.max(projection_error(&p.r, &p.ref_row, p.eta)?);
        // Gaps of order 1/eta keep F smooth on the scale of the grid spacing.
        let local: Vec<f64> = p.r.iter().map(|x| x - rng.random::<f64>() / p.eta.max(1.0)).collect();
        let curve = mean_value_curve(&p.ref_row, &p.r, &local, p.eta, cfg.mean_value_grid)?;
        let lo = curve.f_values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = curve.f_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        bracket_excess = bracket_excess.max((lo - curve.subopt).max(curve.subopt - hi));
        derivative = derivative.max(curve.max_derivative_error());
    }

    let mut perf_ratio = f64::NEG_INFINITY;
    let mut perf_failures = 0usize;
    for i in 0..cfg.pessimistic_probes {
        let mut rng = seeded_rng(derive_seed(cfg.seed, &[STREAM_PESSIMISM, i as u64]));
        let p = draw_probe(&mut rng);
        let check = perf_diff_bound(&p.ref_row, &p.r, &p.r_hat, p.eta)?;
        if !check.holds() {
            perf_failures += 1;
        }
        if check.bound > 0.0 {
            perf_ratio = perf_ratio.max(check.subopt / check.bound);
        }
    }

    let mut fy_min = f64::INFINITY;
    let mut rng = seeded_rng(derive_seed(cfg.seed, &[STREAM_FENCHEL]));
    for _ in 0..cfg.fenchel_young_pairs {
        let y = 1.0 - (rng.random::<f64>() * 8.0 - 4.0).exp();
        let z = rng.random::<f64>() * 12.0 - 2.0;
        if let Some(slack) = fenchel_young_slack(y, z) {
            fy_min = fy_min.min(slack);
        }
    }

    let mut sc_min = f64::INFINITY;
    for i in 0..cfg.strong_convexity_probes {
        let mut rng = seeded_rng(derive_seed(cfg.seed, &[STREAM_CONVEXITY, i as u64]));
        let arms = rng.random_range(2..=8);
        let ref_row = random_ref_row(&mut rng, arms);
        let pi = random_interior(&mut rng, arms);
        let mu = random_interior(&mut rng, arms);
        sc_min = sc_min.min(strong_convexity_gap(&ref_row, &pi, &mu));
    }

    let n = cfg.probes;
    let checks = vec![
        CheckOutcome::at_most("conjugate_gradient_abs", n, gradient, 1e-6),
        CheckOutcome::at_most("bregman_identity_rel", n, bregman, 1e-8),
        CheckOutcome::at_least("bregman_nonnegative", n, bregman_min, -1e-15),
        CheckOutcome::at_most("hessian_fd_rel", n, hessian, 1e-4),
        CheckOutcome::at_most("hessian_projection_abs", n, projection, 1e-8),
        CheckOutcome::at_most("perf_diff_violations", cfg.pessimistic_probes, perf_failures as f64, 0.0),
        CheckOutcome::at_most("perf_diff_ratio", cfg.pessimistic_probes, perf_ratio, 1.0),
        CheckOutcome::at_most("mean_value_bracket_excess", n, bracket_excess, 1e-12),
        CheckOutcome::at_most("mean_value_derivative_abs", n, derivative, 1e-5),
        CheckOutcome::at_least("fenchel_young_slack", cfg.fenchel_young_pairs, fy_min, -FENCHEL_YOUNG_TOL),
        CheckOutcome::at_least("strong_convexity_gap", cfg.strong_convexity_probes, sc_min, -1e-12),
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(TheoryReport {
        config: cfg,
        checks,
        sign_witness: find_sign_indefinite(cfg.seed, 1000)?,
        passed,
    })
}
