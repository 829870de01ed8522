use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::coverage::{build_appendix_b1, build_appendix_b2};
use crate::error::{Error, Result};
use crate::estimators::LinearBanditInstance;
use crate::instance::{BanditInstance, Noise, RewardRange};
use crate::lowerbound::{build_contextual_hard, build_two_arm_pair, HardFamily, SignPattern};
use crate::rng::seeded_rng;
use crate::table::Table;

/// Uniform `rho` and `pi_ref`, mean rewards i.i.d. uniform on `[0, 1]`.
pub fn random_tabular(num_contexts: usize, num_actions: usize, seed: u64, noise: Noise) -> Result<BanditInstance> {
    let mut rng = seeded_rng(seed);
    let rewards = Table::from_fn(num_contexts, num_actions, |_, _| rng.random::<f64>());
    BanditInstance::uniform(rewards, noise)
}

/// Features `(1, x)` with `x` uniform on `[-1, 1]^{d-1}`, and
/// `theta* = (1/2, w)` with `|w|_1 = 1/2`, so every mean reward lies in
/// `[0, 1]`. Uniform `rho` and `pi_ref`, Bernoulli noise.
pub fn random_linear(num_contexts: usize, num_actions: usize, dim: usize, seed: u64) -> Result<LinearBanditInstance> {
    if dim < 2 {
        return Err(Error::ParameterOutOfRange("random linear instances need d >= 2".into()));
    }
    let mut rng = seeded_rng(seed);
    let features: Vec<Vec<Vec<f64>>> = (0..num_contexts)
        .map(|_| {
            (0..num_actions)
                .map(|_| {
                    let mut phi = Vec::with_capacity(dim);
                    phi.push(1.0);
                    phi.extend((1..dim).map(|_| rng.random_range(-1.0..1.0)));
                    phi
                })
                .collect()
        })
        .collect();
    let direction: Vec<f64> = (1..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let l1: f64 = direction.iter().map(|x| x.abs()).sum();
    let mut theta = Vec::with_capacity(dim);
    theta.push(0.5);
    theta.extend(direction.iter().map(|x| 0.5 * x / l1));
    let radius = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    LinearBanditInstance::new(
        features,
        theta,
        radius,
        vec![1.0 / num_contexts as f64; num_contexts],
        Table::filled(num_contexts, num_actions, 1.0 / num_actions as f64),
        Noise::Bernoulli,
        RewardRange::default(),
    )
}

/// Named instance constructors usable from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BuilderSpec {
    RandomTabular {
        #[serde(rename = "S")]
        num_contexts: usize,
        #[serde(rename = "A")]
        num_actions: usize,
        seed: u64,
        #[serde(default = "default_noise")]
        noise: Noise,
    },
    RandomLinear {
        #[serde(rename = "S")]
        num_contexts: usize,
        #[serde(rename = "A")]
        num_actions: usize,
        d: usize,
        seed: u64,
    },
    HardFamily {
        #[serde(rename = "S")]
        num_contexts: usize,
        #[serde(rename = "K")]
        pairs: usize,
        n_target: usize,
        #[serde(default)]
        v_index: u64,
    },
    TwoArm {
        c: f64,
        #[serde(default)]
        mirrored: bool,
    },
    AppendixB1 {
        #[serde(rename = "C")]
        c: f64,
        #[serde(rename = "A")]
        num_good: usize,
    },
    AppendixB2 {
        #[serde(rename = "C")]
        c: f64,
    },
}

fn default_noise() -> Noise {
    Noise::Bernoulli
}

/// A constructed instance, tabular or linear.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltInstance {
    Tabular(BanditInstance),
    Linear(LinearBanditInstance),
}

impl BuiltInstance {
    pub fn base(&self) -> &BanditInstance {
        match self {
            BuiltInstance::Tabular(inst) => inst,
            BuiltInstance::Linear(lin) => lin.base(),
        }
    }

    pub fn linear(&self) -> Option<&LinearBanditInstance> {
        match self {
            BuiltInstance::Linear(lin) => Some(lin),
            BuiltInstance::Tabular(_) => None,
        }
    }
}

impl BuilderSpec {
    /// `eta` is needed by the families whose validity depends on it.
    pub fn build(&self, eta: f64) -> Result<BuiltInstance> {
        Ok(match *self {
            BuilderSpec::RandomTabular {
                num_contexts,
                num_actions,
                seed,
                noise,
            } => BuiltInstance::Tabular(random_tabular(num_contexts, num_actions, seed, noise)?),
            BuilderSpec::RandomLinear {
                num_contexts,
                num_actions,
                d,
                seed,
            } => BuiltInstance::Linear(random_linear(num_contexts, num_actions, d, seed)?),
            BuilderSpec::HardFamily {
                num_contexts,
                pairs,
                n_target,
                v_index,
            } => {
                let family = HardFamily::new(num_contexts, pairs, n_target, eta)?;
                if family.num_patterns_log2() < 64 && v_index >> family.num_patterns_log2() != 0 {
                    return Err(Error::Config(format!("v_index {v_index} out of range")));
                }
                let v = SignPattern::from_index(num_contexts, pairs, v_index);
                BuiltInstance::Tabular(build_contextual_hard(&family, &v)?)
            }
            BuilderSpec::TwoArm { c, mirrored } => {
                let (acute, grave) = build_two_arm_pair(c, eta)?;
                BuiltInstance::Tabular(if mirrored { grave } else { acute })
            }
            BuilderSpec::AppendixB1 { c, num_good } => BuiltInstance::Linear(build_appendix_b1(c, num_good, eta)?),
            BuilderSpec::AppendixB2 { c } => BuiltInstance::Linear(build_appendix_b2(c, eta)?),
        })
    }
}
