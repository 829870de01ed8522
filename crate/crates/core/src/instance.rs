//! Bandit instances, policies and offline datasets.
//!
//! A [`BanditInstance`] is the tabular ground truth: a context distribution
//! `rho`, a full-support reference (behavior) policy `pi_ref`, a table of
//! mean rewards and a noise model. [`sample_dataset`] draws i.i.d. triples
//! `(s, a, r)` with `s ~ rho`, `a ~ pi_ref(.|s)` and `r = r(s, a) + noise`.

use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use crate::table::Table;

/// Inputs must be normalized to this tolerance.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Constructors renormalize silently only below this deviation.
pub const RENORMALIZE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    /// Reward in {0, 1} with mean `r(s, a)`.
    Bernoulli,
    /// `r(s, a)` plus a standard normal draw.
    Gaussian,
}

/// Closed interval that mean rewards must lie in. Defaults to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for RewardRange {
    fn default() -> Self {
        RewardRange { lo: 0.0, hi: 1.0 }
    }
}

impl RewardRange {
    pub fn is_default(&self) -> bool {
        *self == RewardRange::default()
    }
}

fn normalize_vector(v: &mut [f64], what: &str) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("{what} ({x})")));
    }
    let sum: f64 = v.iter().sum();
    if v.iter().any(|&x| x < 0.0) {
        return Err(Error::NotStochastic {
            what: what.to_string(),
            sum,
        });
    }
    let dev = (sum - 1.0).abs();
    if dev <= NORMALIZATION_TOL {
        return Ok(());
    }
    if dev < RENORMALIZE_TOL {
        v.iter_mut().for_each(|x| *x /= sum);
        return Ok(());
    }
    Err(Error::NotStochastic {
        what: what.to_string(),
        sum,
    })
}

fn check_vector(v: &[f64], what: &str) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotStochastic {
            what: what.to_string(),
            sum,
        });
    }
    Ok(())
}

/// Row-stochastic context-to-action table.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Policy {
    probs: Table,
}

impl Policy {
    /// Validates rows, renormalizing those that are off by less than
    /// [`RENORMALIZE_TOL`].
    pub fn new(mut probs: Table) -> Result<Self> {
        for s in 0..probs.rows() {
            normalize_vector(probs.row_mut(s), &format!("policy row {s}"))?;
        }
        Ok(Policy { probs })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Policy::new(Table::from_rows(rows)?)
    }

    pub fn uniform(num_contexts: usize, num_actions: usize) -> Self {
        Policy {
            probs: Table::filled(num_contexts, num_actions, 1.0 / num_actions as f64),
        }
    }

    pub fn probs(&self) -> &Table {
        &self.probs
    }

    pub fn row(&self, s: usize) -> &[f64] {
        self.probs.row(s)
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs.get(s, a)
    }

    pub fn num_contexts(&self) -> usize {
        self.probs.rows()
    }

    pub fn num_actions(&self) -> usize {
        self.probs.cols()
    }

    pub fn is_full_support(&self) -> bool {
        self.probs.as_slice().iter().all(|&p| p > 0.0)
    }

    /// Largest total-variation distance between matching rows.
    pub fn max_row_tv(&self, other: &Policy) -> f64 {
        (0..self.num_contexts())
            .map(|s| {
                0.5 * self
                    .row(s)
                    .iter()
                    .zip(other.row(s))
                    .map(|(p, q)| (p - q).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

impl<'de> Deserialize<'de> for Policy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Policy::new(Table::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Serialized form of a [`BanditInstance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawInstance {
    #[serde(rename = "S")]
    pub num_contexts: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    pub reward_mean: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    pub pi_ref: Vec<Vec<f64>>,
    pub noise: Noise,
    /// Explicit override of the admissible mean-reward interval.
    #[serde(default, skip_serializing_if = "RewardRange::is_default")]
    pub reward_range: RewardRange,
}

/// Checks every instance invariant on raw input, without renormalizing.
pub fn validate_instance(raw: &RawInstance) -> Result<()> {
    let (ns, na) = (raw.num_contexts, raw.num_actions);
    if ns == 0 || na == 0 {
        return Err(Error::Shape("S and A must be positive".into()));
    }
    if raw.rho.len() != ns || raw.pi_ref.len() != ns || raw.reward_mean.len() != ns {
        return Err(Error::Shape(format!("expected {ns} contexts")));
    }
    check_vector(&raw.rho, "rho")?;
    for (s, row) in raw.pi_ref.iter().enumerate() {
        if row.len() != na {
            return Err(Error::Shape(format!("pi_ref row {s} has {} entries", row.len())));
        }
        if let Some(a) = row.iter().position(|&p| p == 0.0) {
            return Err(Error::ZeroSupport { s, a });
        }
        check_vector(row, &format!("pi_ref row {s}"))?;
    }
    let range = raw.reward_range;
    let (lo, hi) = match raw.noise {
        Noise::Bernoulli => (range.lo.max(0.0), range.hi.min(1.0)),
        Noise::Gaussian => (range.lo, range.hi),
    };
    for (s, row) in raw.reward_mean.iter().enumerate() {
        if row.len() != na {
            return Err(Error::Shape(format!(
                "reward_mean row {s} has {} entries",
                row.len()
            )));
        }
        for (a, &value) in row.iter().enumerate() {
            if !(lo..=hi).contains(&value) {
                return Err(Error::RewardOutOfRange { s, a, value, lo, hi });
            }
        }
    }
    Ok(())
}

/// Tabular ground truth. Immutable once built; always valid.
#[derive(Clone, Debug, PartialEq)]
pub struct BanditInstance {
    reward_mean: Table,
    rho: Vec<f64>,
    pi_ref: Policy,
    noise: Noise,
    reward_range: RewardRange,
}

/// The part of an instance a learner may see: everything but the rewards.
#[derive(Clone, Copy, Debug)]
pub struct InstanceMeta<'a> {
    pub rho: &'a [f64],
    pub pi_ref: &'a Policy,
}

impl InstanceMeta<'_> {
    pub fn num_contexts(&self) -> usize {
        self.rho.len()
    }

    pub fn num_actions(&self) -> usize {
        self.pi_ref.num_actions()
    }
}

impl BanditInstance {
    pub fn new(reward_mean: Table, rho: Vec<f64>, pi_ref: Table, noise: Noise) -> Result<Self> {
        Self::with_reward_range(reward_mean, rho, pi_ref, noise, RewardRange::default())
    }

    pub fn with_reward_range(
        reward_mean: Table,
        rho: Vec<f64>,
        pi_ref: Table,
        noise: Noise,
        reward_range: RewardRange,
    ) -> Result<Self> {
        let raw = RawInstance {
            num_contexts: reward_mean.rows(),
            num_actions: reward_mean.cols(),
            reward_mean: reward_mean.to_rows(),
            rho,
            pi_ref: pi_ref.to_rows(),
            noise,
            reward_range,
        };
        Self::from_raw(raw)
    }

    /// Uniform context distribution and uniform reference policy.
    pub fn uniform(reward_mean: Table, noise: Noise) -> Result<Self> {
        let (ns, na) = (reward_mean.rows(), reward_mean.cols());
        Self::new(
            reward_mean,
            vec![1.0 / ns as f64; ns],
            Table::filled(ns, na, 1.0 / na as f64),
            noise,
        )
    }

    pub fn from_raw(mut raw: RawInstance) -> Result<Self> {
        normalize_vector(&mut raw.rho, "rho")?;
        for (s, row) in raw.pi_ref.iter_mut().enumerate() {
            normalize_vector(row, &format!("pi_ref row {s}"))?;
        }
        validate_instance(&raw)?;
        Ok(BanditInstance {
            reward_mean: Table::from_rows(raw.reward_mean)?,
            rho: raw.rho,
            pi_ref: Policy::from_rows(raw.pi_ref)?,
            noise: raw.noise,
            reward_range: raw.reward_range,
        })
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            num_contexts: self.num_contexts(),
            num_actions: self.num_actions(),
            reward_mean: self.reward_mean.to_rows(),
            rho: self.rho.clone(),
            pi_ref: self.pi_ref.probs().to_rows(),
            noise: self.noise,
            reward_range: self.reward_range,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_raw(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("instance serializes")
    }

    /// Re-checks all invariants.
    pub fn validate(&self) -> Result<()> {
        validate_instance(&self.to_raw())
    }

    pub fn num_contexts(&self) -> usize {
        self.rho.len()
    }

    pub fn num_actions(&self) -> usize {
        self.reward_mean.cols()
    }

    pub fn reward_mean(&self) -> &Table {
        &self.reward_mean
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn pi_ref(&self) -> &Policy {
        &self.pi_ref
    }

    pub fn noise(&self) -> Noise {
        self.noise
    }

    pub fn reward_range(&self) -> RewardRange {
        self.reward_range
    }

    pub fn meta(&self) -> InstanceMeta<'_> {
        InstanceMeta {
            rho: &self.rho,
            pi_ref: &self.pi_ref,
        }
    }
}

impl Serialize for BanditInstance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_raw().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BanditInstance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        BanditInstance::from_raw(RawInstance::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub s: usize,
    pub a: usize,
    pub r: f64,
}

/// Ordered i.i.d. samples together with the seed that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct OfflineDataset {
    samples: Vec<Sample>,
    seed: u64,
}

impl OfflineDataset {
    pub fn new(samples: Vec<Sample>, seed: u64, num_contexts: usize, num_actions: usize) -> Result<Self> {
        if let Some(x) = samples
            .iter()
            .find(|x| x.s >= num_contexts || x.a >= num_actions)
        {
            return Err(Error::Shape(format!(
                "sample ({}, {}) outside {num_contexts}×{num_actions}",
                x.s, x.a
            )));
        }
        if let Some(x) = samples.iter().find(|x| !x.r.is_finite()) {
            return Err(Error::NonFinite(format!("reward {}", x.r)));
        }
        Ok(OfflineDataset { samples, seed })
    }

    pub fn empty(seed: u64) -> Self {
        OfflineDataset {
            samples: Vec::new(),
            seed,
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Writes the samples as CSV with header `s,a,r`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for x in &self.samples {
            w.serialize(x)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(
        reader: R,
        seed: u64,
        num_contexts: usize,
        num_actions: usize,
    ) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let samples = rd.deserialize().collect::<std::result::Result<Vec<Sample>, _>>()?;
        OfflineDataset::new(samples, seed, num_contexts, num_actions)
    }
}

/// Draws `n` i.i.d. samples under the behavior policy. Deterministic in `seed`.
pub fn sample_dataset(inst: &BanditInstance, n: usize, seed: u64) -> OfflineDataset {
    let mut rng = seeded_rng(seed);
    let contexts = WeightedIndex::new(inst.rho()).expect("rho is a valid distribution");
    let actions: Vec<WeightedIndex<f64>> = (0..inst.num_contexts())
        .map(|s| WeightedIndex::new(inst.pi_ref().row(s)).expect("pi_ref row is valid"))
        .collect();
    let means = inst.reward_mean();
    let noise = inst.noise();
    let samples = (0..n)
        .map(|_| {
            let s = contexts.sample(&mut rng);
            let a = actions[s].sample(&mut rng);
            let mean = means.get(s, a);
            let r = match noise {
                Noise::Bernoulli => {
                    if rng.random::<f64>() < mean {
                        1.0
                    } else {
                        0.0
                    }
                }
                Noise::Gaussian => mean + rng.sample::<f64, _>(StandardNormal),
            };
            Sample { s, a, r }
        })
        .collect();
    OfflineDataset { samples, seed }
}
