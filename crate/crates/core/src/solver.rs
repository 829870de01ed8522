//! Exact forward-KL-regularized optimal policy.
//!
//! For each context the maximizer of `<r, pi> - eta^{-1} KL(pi_ref || pi)`
//! is `pi(a) = eta^{-1} pi_ref(a) / (lambda - r(a))`, where `lambda` is the
//! unique root above `max r` of the normalization condition
//!
//! ```text
//! sum_a eta^{-1} pi_ref(a) / (lambda - r(a)) = 1.
//! ```
//!
//! The root is found in the shifted variable `t = lambda - max r`, which
//! keeps every denominator `t + (max r - r(a))` free of cancellation even
//! when `eta` is large and `lambda` sits just above the top reward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{BanditInstance, Policy};
use crate::table::Table;

/// Target absolute normalization residual.
pub const LAMBDA_TOL: f64 = 1e-13;
pub const MAX_ITERATIONS: usize = 200;

/// Output of the per-context multiplier solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaRoot {
    pub lambda: f64,
    /// `lambda - max_a r(a)` over supported actions; always positive.
    pub shift: f64,
    pub max_reward: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveEta(eta))
    }
}

/// Normalization map `t -> sum_a w_a / (t + gap_a) - 1` and its derivative.
fn normalization(t: f64, weights: &[f64], gaps: &[f64]) -> (f64, f64) {
    let mut value = 0.0;
    let mut slope = 0.0;
    for (&w, &g) in weights.iter().zip(gaps) {
        if w > 0.0 {
            let q = w / (t + g);
            value += q;
            slope -= q / (t + g);
        }
    }
    (value - 1.0, slope)
}

/// Solves for the multiplier of a single context.
///
/// Actions with zero reference mass are skipped. Rewards may be any finite
/// reals, so pessimistic estimates below zero are accepted.
pub fn solve_lambda_root(rewards: &[f64], ref_row: &[f64], eta: f64) -> Result<LambdaRoot> {
    check_eta(eta)?;
    if rewards.len() != ref_row.len() {
        return Err(Error::Shape(format!(
            "{} rewards for {} reference masses",
            rewards.len(),
            ref_row.len()
        )));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("rewards".into()));
    }
    if ref_row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::NotStochastic {
            what: "reference row".into(),
            sum: ref_row.iter().sum(),
        });
    }
    let mass: f64 = ref_row.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::ZeroRefMass);
    }
    let max_reward = rewards
        .iter()
        .zip(ref_row)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&r, _)| r)
        .fold(f64::NEG_INFINITY, f64::max);
    let inv_eta = 1.0 / eta;
    let weights: Vec<f64> = ref_row.iter().map(|p| p * inv_eta).collect();
    let gaps: Vec<f64> = rewards.iter().map(|r| max_reward - r).collect();
    // Largest reference mass among maximizers gives the tightest valid lower end.
    let top_mass = ref_row
        .iter()
        .zip(&gaps)
        .filter(|(&p, &g)| p > 0.0 && g == 0.0)
        .map(|(&p, _)| p)
        .fold(0.0, f64::max);

    let mut lo = top_mass * inv_eta;
    let mut hi = mass * inv_eta;
    let (f_lo, d_lo) = normalization(lo, &weights, &gaps);
    if f_lo.abs() <= LAMBDA_TOL {
        return Ok(root(lo, max_reward, f_lo.abs(), 0));
    }
    let (f_hi, _) = normalization(hi, &weights, &gaps);
    if f_hi.abs() <= LAMBDA_TOL {
        return Ok(root(hi, max_reward, f_hi.abs(), 0));
    }
    let mut t = lo;
    let (mut f, mut df) = (f_lo, d_lo);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let newton = t - f / df;
        let next = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let (f_next, df_next) = normalization(next, &weights, &gaps);
        if f_next > 0.0 {
            lo = next;
        } else {
            hi = next;
        }
        let stalled = next == t;
        t = next;
        f = f_next;
        df = df_next;
        if f.abs() <= LAMBDA_TOL || stalled || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(root(t, max_reward, f.abs(), iterations))
}

fn root(shift: f64, max_reward: f64, residual: f64, iterations: usize) -> LambdaRoot {
    LambdaRoot {
        lambda: max_reward + shift,
        shift,
        max_reward,
        residual,
        iterations,
    }
}

/// The normalization multiplier `lambda > max r` for one context.
pub fn solve_lambda(rewards: &[f64], ref_row: &[f64], eta: f64) -> Result<f64> {
    solve_lambda_root(rewards, ref_row, eta).map(|r| r.lambda)
}

/// Regularized-optimal action distribution for one context.
pub fn policy_row(rewards: &[f64], ref_row: &[f64], eta: f64) -> Result<(Vec<f64>, LambdaRoot)> {
    let root = solve_lambda_root(rewards, ref_row, eta)?;
    let row = rewards
        .iter()
        .zip(ref_row)
        .map(|(&r, &p)| {
            if p > 0.0 {
                p / eta / (root.shift + (root.max_reward - r))
            } else {
                0.0
            }
        })
        .collect();
    Ok((row, root))
}

/// Optimal policy with its per-context multipliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizedSolution {
    pub policy: Policy,
    pub lambda: Vec<f64>,
    pub eta: f64,
    pub residuals: Vec<f64>,
}

/// Solves every context of an arbitrary finite reward table.
pub fn solve_rewards(rewards: &Table, pi_ref: &Policy, eta: f64) -> Result<RegularizedSolution> {
    check_eta(eta)?;
    if rewards.rows() != pi_ref.num_contexts() || rewards.cols() != pi_ref.num_actions() {
        return Err(Error::Shape("reward table does not match reference policy".into()));
    }
    let mut probs = Table::zeros(rewards.rows(), rewards.cols());
    let mut lambda = Vec::with_capacity(rewards.rows());
    let mut residuals = Vec::with_capacity(rewards.rows());
    for s in 0..rewards.rows() {
        let (row, root) = policy_row(rewards.row(s), pi_ref.row(s), eta)?;
        probs.row_mut(s).copy_from_slice(&row);
        lambda.push(root.lambda);
        residuals.push(root.residual);
    }
    Ok(RegularizedSolution {
        policy: Policy::new(probs)?,
        lambda,
        eta,
        residuals,
    })
}

pub fn optimal_policy(inst: &BanditInstance, eta: f64) -> Result<RegularizedSolution> {
    solve_rewards(inst.reward_mean(), inst.pi_ref(), eta)
}

/// `<r, pi>_rho - eta^{-1} KL(pi_ref || pi)_rho` for explicit ingredients.
pub fn objective_with(
    rewards: &Table,
    rho: &[f64],
    pi_ref: &Policy,
    eta: f64,
    pi: &Policy,
) -> Result<f64> {
    check_eta(eta)?;
    let mut total = 0.0;
    for (s, &w) in rho.iter().enumerate() {
        let mut value = 0.0;
        let mut kl = 0.0;
        for (a, (&p, &q)) in pi.row(s).iter().zip(pi_ref.row(s)).enumerate() {
            value += rewards.get(s, a) * p;
            if q > 0.0 {
                if p <= 0.0 {
                    return Err(Error::MissingSupport { s, a });
                }
                kl += q * (q / p).ln();
            }
        }
        total += w * (value - kl / eta);
    }
    Ok(total)
}

/// Forward-KL-regularized objective `J(pi)` under the instance rewards.
pub fn objective(inst: &BanditInstance, eta: f64, pi: &Policy) -> Result<f64> {
    if pi.num_contexts() != inst.num_contexts() || pi.num_actions() != inst.num_actions() {
        return Err(Error::Shape("policy does not match instance".into()));
    }
    objective_with(inst.reward_mean(), inst.rho(), inst.pi_ref(), eta, pi)
}

/// `psi(x) = x - 1 - ln x`, evaluated as `psi_from_offset(x - 1)`.
pub fn psi(x: f64) -> f64 {
    psi_from_offset(x - 1.0)
}

/// `psi(1 + y) = y - ln(1 + y)` without cancellation near `y = 0`.
pub fn psi_from_offset(y: f64) -> f64 {
    if y.abs() < 1e-2 {
        // y^2/2 - y^3/3 + y^4/4 - ... ; truncated after y^12.
        let mut term = y;
        let mut sum = 0.0;
        for k in 2..=12 {
            term *= -y;
            sum -= term / k as f64;
        }
        sum
    } else {
        y - y.ln_1p()
    }
}

/// `eta^{-1} E_{a ~ ref}[psi(pi(a) / pi*(a))]` for one context.
pub fn psi_gap_row(ref_row: &[f64], opt_row: &[f64], pi_row: &[f64], eta: f64) -> f64 {
    ref_row
        .iter()
        .zip(opt_row)
        .zip(pi_row)
        .filter(|((&q, _), _)| q > 0.0)
        .map(|((&q, &o), &p)| q * psi_from_offset((p - o) / o))
        .sum::<f64>()
        / eta
}

/// Absolute agreement required between the two suboptimality routes.
pub const SUBOPT_AGREEMENT_TOL: f64 = 1e-9;

/// Suboptimality against a precomputed optimum; reusable across many policies.
#[derive(Clone, Debug)]
pub struct SubOptEvaluator<'a> {
    inst: &'a BanditInstance,
    eta: f64,
    optimum: RegularizedSolution,
    optimal_value: f64,
}

impl<'a> SubOptEvaluator<'a> {
    pub fn new(inst: &'a BanditInstance, eta: f64) -> Result<Self> {
        let optimum = optimal_policy(inst, eta)?;
        let optimal_value = objective(inst, eta, &optimum.policy)?;
        Ok(SubOptEvaluator {
            inst,
            eta,
            optimum,
            optimal_value,
        })
    }

    pub fn optimum(&self) -> &RegularizedSolution {
        &self.optimum
    }

    pub fn optimal_value(&self) -> f64 {
        self.optimal_value
    }

    /// `(psi formula, direct J difference)` without the agreement check.
    pub fn both_routes(&self, pi: &Policy) -> Result<(f64, f64)> {
        let inst = self.inst;
        if pi.num_contexts() != inst.num_contexts() || pi.num_actions() != inst.num_actions() {
            return Err(Error::Shape("policy does not match instance".into()));
        }
        for s in 0..pi.num_contexts() {
            if let Some(a) = pi.row(s).iter().position(|&p| p <= 0.0) {
                return Err(Error::MissingSupport { s, a });
            }
        }
        let formula: f64 = inst
            .rho()
            .iter()
            .enumerate()
            .map(|(s, &w)| {
                w * psi_gap_row(
                    inst.pi_ref().row(s),
                    self.optimum.policy.row(s),
                    pi.row(s),
                    self.eta,
                )
            })
            .sum();
        let direct = self.optimal_value - objective(inst, self.eta, pi)?;
        Ok((formula, direct))
    }

    pub fn eval(&self, pi: &Policy) -> Result<f64> {
        let (formula, direct) = self.both_routes(pi)?;
        if (formula - direct).abs() > SUBOPT_AGREEMENT_TOL {
            return Err(Error::IdentityMismatch { formula, direct });
        }
        Ok(formula)
    }
}

/// `J(pi*) - J(pi)`, computed through the psi identity and cross-checked
/// against the direct objective difference.
pub fn suboptimality(inst: &BanditInstance, eta: f64, pi: &Policy) -> Result<f64> {
    SubOptEvaluator::new(inst, eta)?.eval(pi)
}
