//! Concentrability coefficients and the coverage-separation instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{D2Oracle, LinearBanditInstance};
use crate::instance::{BanditInstance, Noise, Policy, RewardRange};
use crate::solver::{optimal_policy, solve_rewards};
use crate::table::Table;

/// A coverage coefficient, possibly unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Coverage {
    Finite(f64),
    Infinite,
}

impl Coverage {
    pub fn finite(self) -> Option<f64> {
        match self {
            Coverage::Finite(v) => Some(v),
            Coverage::Infinite => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub c_pistar: Coverage,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_all: Option<Coverage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d2_pistar: Option<Coverage>,
    pub per_cell: Table,
}

fn density_ratios(pi: &Policy, pi_ref: &Policy) -> Table {
    Table::from_fn(pi.num_contexts(), pi.num_actions(), |s, a| {
        pi.prob(s, a) / pi_ref.prob(s, a)
    })
}

fn table_max(t: &Table) -> f64 {
    t.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `max_{s,a} pi*(a|s) / pi_ref(a|s)`.
pub fn c_pistar(inst: &BanditInstance, eta: f64) -> Result<f64> {
    let opt = optimal_policy(inst, eta)?;
    Ok(table_max(&density_ratios(&opt.policy, inst.pi_ref())))
}

/// Largest density ratio over a supplied policy set.
pub fn c_all(inst: &BanditInstance, policies: &[Policy]) -> Result<Coverage> {
    let mut worst = 0.0f64;
    for pi in policies {
        if pi.num_contexts() != inst.num_contexts() || pi.num_actions() != inst.num_actions() {
            return Err(Error::Shape("policy does not match instance".into()));
        }
        worst = worst.max(table_max(&density_ratios(pi, inst.pi_ref())));
    }
    Ok(Coverage::Finite(worst))
}

/// `E_{rho x pi*}[D^2((s,a); pi_ref)]`.
pub fn d2_pistar(lin: &LinearBanditInstance, eta: f64) -> Result<Coverage> {
    let base = lin.base();
    let opt = optimal_policy(base, eta)?;
    let oracle = D2Oracle::new(lin.meta(), base.pi_ref())?;
    let mut total = 0.0;
    for (s, &w) in base.rho().iter().enumerate() {
        for a in 0..base.num_actions() {
            let mass = w * opt.policy.prob(s, a);
            if mass > 0.0 {
                match oracle.d2(s, a) {
                    Ok(d2) => total += mass * d2,
                    Err(Error::OutOfRangeFeature { .. }) => return Ok(Coverage::Infinite),
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(Coverage::Finite(total))
}

pub fn coverage_report(
    inst: &BanditInstance,
    eta: f64,
    policies: Option<&[Policy]>,
    lin: Option<&LinearBanditInstance>,
) -> Result<CoverageReport> {
    let opt = solve_rewards(inst.reward_mean(), inst.pi_ref(), eta)?;
    let per_cell = density_ratios(&opt.policy, inst.pi_ref());
    Ok(CoverageReport {
        c_pistar: Coverage::Finite(table_max(&per_cell)),
        c_all: policies.map(|p| c_all(inst, p)).transpose()?,
        d2_pistar: lin.map(|l| d2_pistar(l, eta)).transpose()?,
        per_cell,
    })
}

fn basis(d: usize, i: usize) -> Vec<f64> {
    (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
}

/// Single-context instance with `d = 2A + 1` standard-basis arms, where the
/// first `A` arms pay 1 and the reference policy spreads `1/C` evenly over
/// the first `2A` arms.
pub fn build_appendix_b1(c: f64, num_good: usize, eta: f64) -> Result<LinearBanditInstance> {
    if !(c > 1.0 && c.is_finite()) || num_good == 0 || !(eta >= 2.0 && eta.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!(
            "need C > 1, A >= 1, eta >= 2 (got C = {c}, A = {num_good}, eta = {eta})"
        )));
    }
    let d = 2 * num_good + 1;
    let features = vec![(0..d).map(|i| basis(d, i)).collect()];
    let theta: Vec<f64> = (0..d).map(|i| (i < num_good) as u8 as f64).collect();
    let mut pi_ref = vec![1.0 / (2.0 * num_good as f64 * c); d];
    pi_ref[d - 1] = (c - 1.0) / c;
    LinearBanditInstance::new(
        features,
        theta,
        (d as f64).sqrt(),
        vec![1.0],
        Table::from_rows(vec![pi_ref])?,
        Noise::Bernoulli,
        RewardRange::default(),
    )
}

/// Closed-form optimal mass on each rewarding arm of [`build_appendix_b1`].
pub fn appendix_b1_optimal_mass(c: f64, num_good: usize, eta: f64) -> f64 {
    let q = ((eta - 1.0).powi(2) * c * c + 2.0 * eta * c).sqrt();
    (q + (eta - 1.0) * c) / (2.0 * eta * c * num_good as f64)
}

/// Three arms `(1,0), (0,1), (1,1)` with `theta* = (1,1)`, so the third arm
/// pays 2; the mean-reward range is widened to `[0, 2]` accordingly.
pub fn build_appendix_b2(c: f64, eta: f64) -> Result<LinearBanditInstance> {
    if !(c >= 2.0 && c.is_finite()) || !(eta >= 2.0 && eta.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!(
            "need C >= 2, eta >= 2 (got C = {c}, eta = {eta})"
        )));
    }
    let side = 0.5 - 0.5 / c;
    LinearBanditInstance::new(
        vec![vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]],
        vec![1.0, 1.0],
        2f64.sqrt(),
        vec![1.0],
        Table::from_rows(vec![vec![side, side, 1.0 / c]])?,
        Noise::Gaussian,
        RewardRange { lo: 0.0, hi: 2.0 },
    )
}

/// Closed-form optimal mass on the third arm of [`build_appendix_b2`].
pub fn appendix_b2_optimal_mass(c: f64, eta: f64) -> f64 {
    ((eta - 1.0) + ((eta - 1.0).powi(2) + 4.0 * eta / c).sqrt()) / (2.0 * eta)
}
