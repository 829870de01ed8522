use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::builders::{BuilderSpec, BuiltInstance};
use crate::error::{Error, Result};
use crate::estimators::{LinearBanditInstance, LinearPcbConfig};
use crate::instance::BanditInstance;

/// Where the experiment's instance comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceSource {
    Inline(BanditInstance),
    InlineLinear(LinearBanditInstance),
    Builder(BuilderSpec),
}

impl InstanceSource {
    pub fn build(&self, eta: f64) -> Result<BuiltInstance> {
        match self {
            InstanceSource::Inline(inst) => Ok(BuiltInstance::Tabular(inst.clone())),
            InstanceSource::InlineLinear(lin) => Ok(BuiltInstance::Linear(lin.clone())),
            InstanceSource::Builder(spec) => spec.build(eta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    FklPcb,
    Greedy,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FklPcb => "fkl-pcb",
            Algorithm::Greedy => "greedy",
        }
    }
}

fn default_c_beta() -> f64 {
    LinearPcbConfig::default().c_beta
}

/// A rate experiment: one instance, one learner, a grid of sample sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub algorithm: Algorithm,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub eta: f64,
    pub delta: f64,
    #[serde(default = "default_c_beta")]
    pub c_beta: f64,
    #[serde(default)]
    pub eps_cover: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.len() < 4 {
            return Err(Error::Config("n_grid needs at least 4 points".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be strictly increasing".into()));
        }
        if self.n_grid[0] == 0 {
            return Err(Error::Config("n_grid values must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::NonPositiveEta(self.eta));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidDelta(self.delta));
        }
        if !(self.c_beta >= 0.0 && self.c_beta.is_finite()) {
            return Err(Error::Config("c_beta must be nonnegative".into()));
        }
        if self.eps_cover.is_some_and(|e| !(e >= 0.0)) {
            return Err(Error::Config("eps_cover must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn linear_config(&self) -> LinearPcbConfig {
        LinearPcbConfig {
            c_beta: self.c_beta,
            eps_cover: self.eps_cover,
        }
    }
}
