//! Hard instances for the lower bound and an empirical minimax-risk estimate.
//!
//! Empirical risks over the implemented estimators are evidence for the
//! floor, not a proof of it: "any estimator" is approximated by the
//! pessimistic and plug-in learners plus the uniform and oracle baselines.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{fkl_pcb_tabular, greedy_tabular};
use crate::instance::{sample_dataset, BanditInstance, Noise, OfflineDataset, Policy};
use crate::rng::{derive_seed, seeded_rng};
use crate::solver::{optimal_policy, SubOptEvaluator};
use crate::table::Table;

/// Patterns are enumerated exhaustively up to this many, sampled above.
pub const EXHAUSTIVE_LIMIT: usize = 64;

/// Contextual family with `A = 2K` arms per context and perturbation `c = sqrt(SA/n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardFamily {
    pub num_contexts: usize,
    pub pairs: usize,
    pub n_target: usize,
    pub c: f64,
    pub eta: f64,
}

impl HardFamily {
    pub fn new(num_contexts: usize, pairs: usize, n_target: usize, eta: f64) -> Result<Self> {
        if num_contexts == 0 || pairs == 0 {
            return Err(Error::PreconditionViolated("S and K must be positive".into()));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::NonPositiveEta(eta));
        }
        let sa = (num_contexts * 2 * pairs) as f64;
        let n = n_target as f64;
        if !(n > 16.0 * sa && n > 4.0 * eta * eta * sa) {
            return Err(Error::PreconditionViolated(format!(
                "n = {n_target} must exceed max(16SA, 4 eta^2 SA) = {}",
                (16.0 * sa).max(4.0 * eta * eta * sa)
            )));
        }
        Ok(HardFamily {
            num_contexts,
            pairs,
            n_target,
            c: (sa / n).sqrt(),
            eta,
        })
    }

    pub fn num_actions(&self) -> usize {
        2 * self.pairs
    }

    pub fn num_patterns_log2(&self) -> usize {
        self.num_contexts * self.pairs
    }

    /// `omega = 2 eta c / (1 + sqrt(1 + 4 eta^2 c^2))`.
    pub fn omega(&self) -> f64 {
        let ec = self.eta * self.c;
        2.0 * ec / (1.0 + (1.0 + 4.0 * ec * ec).sqrt())
    }
}

/// One element of `{+1, -1}^{S x K}`, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignPattern {
    pub num_contexts: usize,
    pub pairs: usize,
    pub signs: Vec<i8>,
}

impl SignPattern {
    pub fn new(num_contexts: usize, pairs: usize, signs: Vec<i8>) -> Result<Self> {
        if signs.len() != num_contexts * pairs || signs.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::Shape(format!(
                "expected {} signs in {{+1, -1}}",
                num_contexts * pairs
            )));
        }
        Ok(SignPattern {
            num_contexts,
            pairs,
            signs,
        })
    }

    pub fn constant(num_contexts: usize, pairs: usize, sign: i8) -> Self {
        SignPattern {
            num_contexts,
            pairs,
            signs: vec![sign.signum(); num_contexts * pairs],
        }
    }

    /// Bit `i` of `index` set means entry `i` is `-1`.
    pub fn from_index(num_contexts: usize, pairs: usize, index: u64) -> Self {
        let signs = (0..num_contexts * pairs)
            .map(|i| if (index >> i) & 1 == 1 { -1 } else { 1 })
            .collect();
        SignPattern {
            num_contexts,
            pairs,
            signs,
        }
    }

    pub fn get(&self, s: usize, k: usize) -> i8 {
        self.signs[s * self.pairs + k]
    }

    pub fn negated(&self) -> Self {
        SignPattern {
            signs: self.signs.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }

    fn matches(&self, family: &HardFamily) -> Result<()> {
        if self.num_contexts != family.num_contexts || self.pairs != family.pairs {
            return Err(Error::Shape("sign pattern does not match family".into()));
        }
        Ok(())
    }
}

/// Bernoulli instance with `r(s, 2k) = 0.5 - v c`, `r(s, 2k+1) = 0.5 + v c`.
pub fn build_contextual_hard(family: &HardFamily, v: &SignPattern) -> Result<BanditInstance> {
    v.matches(family)?;
    let rewards = Table::from_fn(family.num_contexts, family.num_actions(), |s, a| {
        let sign = f64::from(v.get(s, a / 2));
        if a % 2 == 0 {
            0.5 - sign * family.c
        } else {
            0.5 + sign * family.c
        }
    });
    BanditInstance::uniform(rewards, Noise::Bernoulli)
}

/// `pi*(a|s) = (1 - kappa omega) / A` with `kappa = (-1)^a v_{s, a/2}`.
pub fn closed_form_hard_policy(family: &HardFamily, v: &SignPattern) -> Result<Policy> {
    v.matches(family)?;
    let omega = family.omega();
    let na = family.num_actions();
    let probs = Table::from_fn(family.num_contexts, na, |s, a| {
        let parity = if a % 2 == 0 { 1.0 } else { -1.0 };
        (1.0 - parity * f64::from(v.get(s, a / 2)) * omega) / na as f64
    });
    Policy::new(probs)
}

fn check_two_arm(c: f64, eta: f64) -> Result<()> {
    if !(c > 0.0 && c < 0.25) {
        return Err(Error::ParameterOutOfRange(format!("c = {c} outside (0, 0.25)")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::NonPositiveEta(eta));
    }
    Ok(())
}

/// Mirrored pair `(0.5 + c, 0.5 - c)` and `(0.5 - c, 0.5 + c)` with uniform reference.
pub fn build_two_arm_pair(c: f64, eta: f64) -> Result<(BanditInstance, BanditInstance)> {
    check_two_arm(c, eta)?;
    let acute = BanditInstance::uniform(Table::from_rows(vec![vec![0.5 + c, 0.5 - c]])?, Noise::Bernoulli)?;
    let grave = BanditInstance::uniform(Table::from_rows(vec![vec![0.5 - c, 0.5 + c]])?, Noise::Bernoulli)?;
    Ok((acute, grave))
}

/// Shared multiplier: `2 lambda - 1 = 1/eta + sqrt(1/eta^2 + 4 c^2)`.
pub fn two_arm_lambda(c: f64, eta: f64) -> f64 {
    let inv = 1.0 / eta;
    0.5 * (1.0 + inv + (inv * inv + 4.0 * c * c).sqrt())
}

/// Minimum over estimators of the summed suboptimality on the mirrored pair:
/// `4c^2 / (2 lambda - 1) - log(eta (2 lambda - 1) / 2) / eta`.
pub fn two_arm_floor(c: f64, eta: f64) -> f64 {
    let t = 2.0 * two_arm_lambda(c, eta) - 1.0;
    4.0 * c * c / t - (eta * t / 2.0).ln() / eta
}

/// KL divergence between the two single-sample observation laws.
pub fn two_arm_kl(c: f64) -> f64 {
    2.0 * c * ((1.0 + 2.0 * c) / (1.0 - 2.0 * c)).ln()
}

/// Estimators available to the risk experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    FklPcb,
    Greedy,
    Uniform,
    Oracle,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::FklPcb,
        EstimatorKind::Greedy,
        EstimatorKind::Uniform,
        EstimatorKind::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::FklPcb => "fkl-pcb",
            EstimatorKind::Greedy => "greedy",
            EstimatorKind::Uniform => "uniform",
            EstimatorKind::Oracle => "oracle",
        }
    }

    /// Runs the estimator. Only the oracle looks past the instance metadata.
    pub fn estimate(
        self,
        data: &OfflineDataset,
        inst: &BanditInstance,
        eta: f64,
        delta: f64,
    ) -> Result<Policy> {
        match self {
            EstimatorKind::FklPcb => fkl_pcb_tabular(data, inst.meta(), eta, delta),
            EstimatorKind::Greedy => greedy_tabular(data, inst.meta(), eta),
            EstimatorKind::Uniform => Ok(inst.pi_ref().clone()),
            EstimatorKind::Oracle => Ok(optimal_policy(inst, eta)?.policy),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Enumeration {
    Exhaustive,
    Sampled,
}

/// Settings of one risk experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub delta: f64,
    /// Number of patterns drawn when the family is too large to enumerate.
    pub sampled_patterns: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskSample {
    pub v_index: usize,
    pub trial: usize,
    pub subopt: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternRisk {
    pub v_index: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub estimator: String,
    pub enumeration: Enumeration,
    pub patterns: Vec<PatternRisk>,
    pub mean_risk: f64,
    pub mean_stderr: f64,
    pub max_risk: f64,
    pub max_stderr: f64,
    pub samples: Vec<RiskSample>,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// The patterns evaluated for a family, with how they were chosen.
pub fn risk_patterns(family: &HardFamily, cfg: &RiskConfig) -> (Enumeration, Vec<SignPattern>) {
    let bits = family.num_patterns_log2();
    let (s, k) = (family.num_contexts, family.pairs);
    if bits < 63 && (1usize << bits) <= EXHAUSTIVE_LIMIT {
        let all = (0..1u64 << bits).map(|i| SignPattern::from_index(s, k, i)).collect();
        (Enumeration::Exhaustive, all)
    } else {
        let mut rng = seeded_rng(derive_seed(cfg.seed, &[u64::MAX]));
        let drawn = (0..cfg.sampled_patterns.max(1))
            .map(|_| {
                let signs = (0..bits).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
                SignPattern { num_contexts: s, pairs: k, signs }
            })
            .collect();
        (Enumeration::Sampled, drawn)
    }
}

/// Risk of an arbitrary learner over the family; trial seeds are
/// `derive_seed(seed, [v_index, trial])`.
pub fn minimax_risk<F>(family: &HardFamily, cfg: &RiskConfig, name: &str, estimator: F) -> Result<RiskReport>
where
    F: Fn(&OfflineDataset, &BanditInstance) -> Result<Policy> + Sync,
{
    Ok(minimax_risk_many(family, cfg, &[(name, &estimator)])?.remove(0))
}

type EstimatorFn<'a> = dyn Fn(&OfflineDataset, &BanditInstance) -> Result<Policy> + Sync + 'a;
type DynEstimator<'a> = &'a EstimatorFn<'a>;

/// Several learners evaluated on shared datasets.
pub fn minimax_risk_many(
    family: &HardFamily,
    cfg: &RiskConfig,
    estimators: &[(&str, DynEstimator<'_>)],
) -> Result<Vec<RiskReport>> {
    if cfg.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let (enumeration, patterns) = risk_patterns(family, cfg);
    let mut per_estimator: Vec<Vec<RiskSample>> = vec![Vec::new(); estimators.len()];
    for (v_index, v) in patterns.iter().enumerate() {
        let inst = build_contextual_hard(family, v)?;
        let evaluator = SubOptEvaluator::new(&inst, family.eta)?;
        let rows: Vec<Vec<f64>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = derive_seed(cfg.seed, &[v_index as u64, trial as u64]);
                let data = sample_dataset(&inst, cfg.n, seed);
                estimators
                    .iter()
                    .map(|(_, est)| evaluator.eval(&est(&data, &inst)?))
                    .collect::<Result<Vec<f64>>>()
                    .map_err(|e| Error::Trial {
                        seed,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<_>>()?;
        for (trial, row) in rows.into_iter().enumerate() {
            for (slot, subopt) in per_estimator.iter_mut().zip(row) {
                slot.push(RiskSample {
                    v_index,
                    trial,
                    subopt,
                });
            }
        }
    }
    Ok(estimators
        .iter()
        .zip(per_estimator)
        .map(|((name, _), samples)| summarize(name, enumeration, patterns.len(), cfg.trials, samples))
        .collect())
}

fn summarize(
    name: &str,
    enumeration: Enumeration,
    num_patterns: usize,
    trials: usize,
    samples: Vec<RiskSample>,
) -> RiskReport {
    let values: Vec<f64> = samples.iter().map(|s| s.subopt).collect();
    let patterns: Vec<PatternRisk> = (0..num_patterns)
        .map(|v_index| {
            let (mean, stderr) = mean_stderr(&values[v_index * trials..(v_index + 1) * trials]);
            PatternRisk {
                v_index,
                mean,
                stderr,
            }
        })
        .collect();
    let (mean_risk, mean_stderr) = mean_stderr(&values);
    let worst = patterns
        .iter()
        .copied()
        .fold(patterns[0], |a, b| if b.mean > a.mean { b } else { a });
    RiskReport {
        estimator: name.to_string(),
        enumeration,
        patterns,
        mean_risk,
        mean_stderr,
        max_risk: worst.mean,
        max_stderr: worst.stderr,
        samples,
    }
}

/// Risk reports for the built-in estimators.
pub fn estimator_risks(family: &HardFamily, cfg: &RiskConfig, kinds: &[EstimatorKind]) -> Result<Vec<RiskReport>> {
    let (eta, delta) = (family.eta, cfg.delta);
    let closures: Vec<Box<EstimatorFn<'static>>> = kinds
        .iter()
        .map(|&kind| {
            Box::new(move |data: &OfflineDataset, inst: &BanditInstance| kind.estimate(data, inst, eta, delta))
                as Box<EstimatorFn<'static>>
        })
        .collect();
    let named: Vec<(&str, DynEstimator<'_>)> = kinds
        .iter()
        .zip(&closures)
        .map(|(k, f)| (k.name(), f.as_ref() as DynEstimator<'_>))
        .collect();
    minimax_risk_many(family, cfg, &named)
}
