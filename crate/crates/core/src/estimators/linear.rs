use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::tabular::check_delta;
use crate::error::{Error, Result};
use crate::instance::{BanditInstance, Noise, OfflineDataset, Policy, RewardRange};
use crate::solver::{solve_rewards, RegularizedSolution};
use crate::table::Table;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const PINV_RTOL: f64 = 1e-12;
/// Relative residual above which a feature counts as outside a matrix range.
pub const RANGE_RTOL: f64 = 1e-8;

/// Linear reward model `r(s, a) = <theta*, phi(s, a)>` over a tabular instance.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearBanditInstance {
    dim: usize,
    /// Row `s * A + a` holds `phi(s, a)`.
    features: Vec<Vec<f64>>,
    theta_star: Vec<f64>,
    radius: f64,
    base: BanditInstance,
}

/// Serialized form of a [`LinearBanditInstance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawLinearInstance {
    #[serde(rename = "S")]
    pub num_contexts: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    pub d: usize,
    /// `features[s][a]` is a length-`d` vector.
    pub features: Vec<Vec<Vec<f64>>>,
    pub theta_star: Vec<f64>,
    pub radius: f64,
    pub rho: Vec<f64>,
    pub pi_ref: Vec<Vec<f64>>,
    pub noise: Noise,
    #[serde(default, skip_serializing_if = "RewardRange::is_default")]
    pub reward_range: RewardRange,
}

/// What a linear learner may see: features, radius, rho and pi_ref.
#[derive(Clone, Copy, Debug)]
pub struct LinearMeta<'a> {
    pub dim: usize,
    pub num_actions: usize,
    pub features: &'a [Vec<f64>],
    pub radius: f64,
    pub rho: &'a [f64],
    pub pi_ref: &'a Policy,
}

impl LinearMeta<'_> {
    pub fn num_contexts(&self) -> usize {
        self.rho.len()
    }

    pub fn feature(&self, s: usize, a: usize) -> &[f64] {
        &self.features[s * self.num_actions + a]
    }
}

impl LinearBanditInstance {
    /// `features[s][a]` must all have length `theta_star.len()`.
    pub fn new(
        features: Vec<Vec<Vec<f64>>>,
        theta_star: Vec<f64>,
        radius: f64,
        rho: Vec<f64>,
        pi_ref: Table,
        noise: Noise,
        reward_range: RewardRange,
    ) -> Result<Self> {
        let dim = theta_star.len();
        if dim == 0 {
            return Err(Error::Shape("feature dimension must be positive".into()));
        }
        let num_contexts = features.len();
        let num_actions = features.first().map_or(0, Vec::len);
        if num_contexts == 0 || num_actions == 0 {
            return Err(Error::Shape("empty feature map".into()));
        }
        let mut flat = Vec::with_capacity(num_contexts * num_actions);
        for (s, row) in features.into_iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::Shape(format!("context {s} has {} features", row.len())));
            }
            for (a, phi) in row.into_iter().enumerate() {
                if phi.len() != dim {
                    return Err(Error::Shape(format!("phi({s}, {a}) has length {}", phi.len())));
                }
                if phi.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!("phi({s}, {a})")));
                }
                flat.push(phi);
            }
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::ParameterOutOfRange(format!("radius {radius}")));
        }
        let norm = dot(&theta_star, &theta_star).sqrt();
        if !(norm <= radius * (1.0 + 1e-12)) {
            return Err(Error::ParameterOutOfRange(format!(
                "|theta*| = {norm} exceeds radius {radius}"
            )));
        }
        let rewards = Table::from_fn(num_contexts, num_actions, |s, a| {
            dot(&theta_star, &flat[s * num_actions + a])
        });
        let base = BanditInstance::with_reward_range(rewards, rho, pi_ref, noise, reward_range)?;
        Ok(LinearBanditInstance {
            dim,
            features: flat,
            theta_star,
            radius,
            base,
        })
    }

    pub fn from_raw(raw: RawLinearInstance) -> Result<Self> {
        if raw.features.len() != raw.num_contexts
            || raw.features.iter().any(|row| row.len() != raw.num_actions)
            || raw.theta_star.len() != raw.d
        {
            return Err(Error::Shape("linear instance dimensions disagree with S, A, d".into()));
        }
        Self::new(
            raw.features,
            raw.theta_star,
            raw.radius,
            raw.rho,
            Table::from_rows(raw.pi_ref)?,
            raw.noise,
            raw.reward_range,
        )
    }

    pub fn to_raw(&self) -> RawLinearInstance {
        let (ns, na) = (self.base.num_contexts(), self.base.num_actions());
        RawLinearInstance {
            num_contexts: ns,
            num_actions: na,
            d: self.dim,
            features: (0..ns)
                .map(|s| (0..na).map(|a| self.feature(s, a).to_vec()).collect())
                .collect(),
            theta_star: self.theta_star.clone(),
            radius: self.radius,
            rho: self.base.rho().to_vec(),
            pi_ref: self.base.pi_ref().probs().to_rows(),
            noise: self.base.noise(),
            reward_range: self.base.reward_range(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_raw(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("instance serializes")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn feature(&self, s: usize, a: usize) -> &[f64] {
        &self.features[s * self.base.num_actions() + a]
    }

    /// The induced tabular instance, used for sampling and evaluation.
    pub fn base(&self) -> &BanditInstance {
        &self.base
    }

    pub fn meta(&self) -> LinearMeta<'_> {
        LinearMeta {
            dim: self.dim,
            num_actions: self.base.num_actions(),
            features: &self.features,
            radius: self.radius,
            rho: self.base.rho(),
            pi_ref: self.base.pi_ref(),
        }
    }
}

impl Serialize for LinearBanditInstance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_raw().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LinearBanditInstance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Self::from_raw(RawLinearInstance::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Moore-Penrose inverse of a symmetric PSD matrix with the range projector.
#[derive(Clone, Debug)]
pub struct SymmetricPinv {
    pub pinv: DMatrix<f64>,
    pub projector: DMatrix<f64>,
    pub rank: usize,
}

impl SymmetricPinv {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let sym = (m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let top = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let cutoff = PINV_RTOL * top;
        let mut pinv = DMatrix::zeros(n, n);
        let mut projector = DMatrix::zeros(n, n);
        let mut rank = 0;
        for (i, &value) in eig.eigenvalues.iter().enumerate() {
            if top > 0.0 && value > cutoff {
                let u = eig.eigenvectors.column(i);
                let outer = u * u.transpose();
                pinv += &outer / value;
                projector += outer;
                rank += 1;
            }
        }
        SymmetricPinv {
            pinv,
            projector,
            rank,
        }
    }

    pub fn in_range(&self, v: &DVector<f64>) -> bool {
        let residual = v - &self.projector * v;
        residual.norm() <= RANGE_RTOL * v.norm().max(f64::MIN_POSITIVE)
    }
}

/// `E_{s ~ rho, a ~ pi}[phi phi^T]`.
pub fn population_gram(meta: LinearMeta<'_>, pi: &Policy) -> DMatrix<f64> {
    let mut gram = DMatrix::zeros(meta.dim, meta.dim);
    for (s, &w) in meta.rho.iter().enumerate() {
        for a in 0..meta.num_actions {
            let weight = w * pi.prob(s, a);
            if weight > 0.0 {
                let phi = DVector::from_column_slice(meta.feature(s, a));
                gram += (&phi * phi.transpose()) * weight;
            }
        }
    }
    gram
}

/// Evaluates the linear-class D^2 divergence against a fixed policy.
#[derive(Clone, Debug)]
pub struct D2Oracle<'a> {
    meta: LinearMeta<'a>,
    gram: DMatrix<f64>,
    pinv: SymmetricPinv,
}

impl<'a> D2Oracle<'a> {
    pub fn new(meta: LinearMeta<'a>, pi: &Policy) -> Result<Self> {
        if pi.num_contexts() != meta.num_contexts() || pi.num_actions() != meta.num_actions {
            return Err(Error::Shape("policy does not match feature map".into()));
        }
        let gram = population_gram(meta, pi);
        let pinv = SymmetricPinv::new(&gram);
        Ok(D2Oracle { meta, gram, pinv })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `phi(s,a)^T Sigma^+ phi(s,a)`, or `OutOfRangeFeature` when unbounded.
    pub fn d2(&self, s: usize, a: usize) -> Result<f64> {
        let phi = DVector::from_column_slice(self.meta.feature(s, a));
        if !self.pinv.in_range(&phi) {
            return Err(Error::OutOfRangeFeature { s, a });
        }
        Ok((phi.transpose() * &self.pinv.pinv * &phi)[(0, 0)].max(0.0))
    }

    pub fn table(&self) -> Result<Table> {
        let (ns, na) = (self.meta.num_contexts(), self.meta.num_actions);
        let mut out = Table::zeros(ns, na);
        for s in 0..ns {
            for a in 0..na {
                out.set(s, a, self.d2(s, a)?);
            }
        }
        Ok(out)
    }
}

pub fn d2_divergence(lin: &LinearBanditInstance, pi: &Policy, s: usize, a: usize) -> Result<f64> {
    D2Oracle::new(lin.meta(), pi)?.d2(s, a)
}

/// Minimum-norm least-squares fit of the observed rewards on the features.
pub fn least_squares(data: &OfflineDataset, meta: LinearMeta<'_>) -> Result<Vec<f64>> {
    let d = meta.dim;
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut moment = DVector::<f64>::zeros(d);
    // Aggregate per cell first: the Gram only depends on visit counts.
    let na = meta.num_actions;
    let cells = meta.num_contexts() * na;
    let mut counts = vec![0u64; cells];
    let mut sums = vec![0.0; cells];
    for sample in data.samples() {
        if sample.s >= meta.num_contexts() || sample.a >= na {
            return Err(Error::Shape(format!(
                "sample ({}, {}) outside the feature map",
                sample.s, sample.a
            )));
        }
        counts[sample.s * na + sample.a] += 1;
        sums[sample.s * na + sample.a] += sample.r;
    }
    for (cell, (&count, &sum)) in counts.iter().zip(&sums).enumerate() {
        if count > 0 {
            let phi = DVector::from_column_slice(&meta.features[cell]);
            gram += (&phi * phi.transpose()) * count as f64;
            moment += phi * sum;
        }
    }
    let theta = SymmetricPinv::new(&gram).pinv * moment;
    Ok(theta.iter().copied().collect())
}

/// Knobs for the confidence radius of the linear learner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPcbConfig {
    pub c_beta: f64,
    /// Covering resolution; `None` means `1 / n`.
    pub eps_cover: Option<f64>,
}

impl Default for LinearPcbConfig {
    fn default() -> Self {
        LinearPcbConfig {
            c_beta: 2.0,
            eps_cover: None,
        }
    }
}

/// `c_beta * sqrt((d log(1 + 2Rn) + log(2/delta)) / n + eps)`.
pub fn confidence_radius(n: usize, dim: usize, radius: f64, delta: f64, cfg: LinearPcbConfig) -> f64 {
    let n = n as f64;
    let eps = cfg.eps_cover.unwrap_or(1.0 / n);
    let log_cover = dim as f64 * (1.0 + 2.0 * radius * n).ln();
    cfg.c_beta * ((log_cover + (2.0 / delta).ln()) / n + eps).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearPessimisticEstimate {
    pub theta_hat: Vec<f64>,
    pub beta: f64,
    /// Population second moment of the features under `rho x pi_ref`.
    pub gram: Vec<Vec<f64>>,
    pub gamma: Table,
    pub r_pess: Table,
}

fn predicted(meta: LinearMeta<'_>, theta: &[f64]) -> Table {
    Table::from_fn(meta.num_contexts(), meta.num_actions, |s, a| {
        dot(theta, meta.feature(s, a))
    })
}

pub fn fit_linear(
    data: &OfflineDataset,
    meta: LinearMeta<'_>,
    delta: f64,
    cfg: LinearPcbConfig,
) -> Result<LinearPessimisticEstimate> {
    check_delta(delta)?;
    if data.is_empty() {
        return Err(Error::PreconditionViolated(
            "linear learner needs at least one sample".into(),
        ));
    }
    if !(cfg.c_beta >= 0.0) || cfg.eps_cover.is_some_and(|e| !(e >= 0.0)) {
        return Err(Error::Config("c_beta and eps_cover must be nonnegative".into()));
    }
    let theta_hat = least_squares(data, meta)?;
    let beta = confidence_radius(data.len(), meta.dim, meta.radius, delta, cfg);
    let oracle = D2Oracle::new(meta, meta.pi_ref)?;
    let gamma = oracle.table()?.map(|d2| beta * d2.sqrt());
    let r_pess = predicted(meta, &theta_hat).zip_with(&gamma, |r, g| r - g)?;
    let gram = oracle.gram();
    Ok(LinearPessimisticEstimate {
        theta_hat,
        beta,
        gram: (0..meta.dim)
            .map(|i| (0..meta.dim).map(|j| gram[(i, j)]).collect())
            .collect(),
        gamma,
        r_pess,
    })
}

pub fn fit_fkl_pcb_linear(
    data: &OfflineDataset,
    meta: LinearMeta<'_>,
    eta: f64,
    delta: f64,
    cfg: LinearPcbConfig,
) -> Result<(LinearPessimisticEstimate, RegularizedSolution)> {
    let est = fit_linear(data, meta, delta, cfg)?;
    let solution = solve_rewards(&est.r_pess, meta.pi_ref, eta)?;
    Ok((est, solution))
}

pub fn fkl_pcb_linear(
    data: &OfflineDataset,
    meta: LinearMeta<'_>,
    eta: f64,
    delta: f64,
    cfg: LinearPcbConfig,
) -> Result<Policy> {
    fit_fkl_pcb_linear(data, meta, eta, delta, cfg).map(|(_, sol)| sol.policy)
}

/// Plug-in learner on the least-squares rewards.
pub fn greedy_linear(data: &OfflineDataset, meta: LinearMeta<'_>, eta: f64) -> Result<Policy> {
    let theta = if data.is_empty() {
        vec![0.0; meta.dim]
    } else {
        least_squares(data, meta)?
    };
    Ok(solve_rewards(&predicted(meta, &theta), meta.pi_ref, eta)?.policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Sample;

    fn basis_instance(p: &[f64]) -> LinearBanditInstance {
        let d = p.len();
        let features = vec![(0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()];
        LinearBanditInstance::new(
            features,
            vec![0.5; d],
            1.0 * (d as f64).sqrt(),
            vec![1.0],
            Table::from_rows(vec![p.to_vec()]).unwrap(),
            Noise::Bernoulli,
            RewardRange::default(),
        )
        .unwrap()
    }

    #[test]
    fn basis_d2_is_inverse_mass() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let lin = basis_instance(&p);
        for (a, &q) in p.iter().enumerate() {
            let value = d2_divergence(&lin, lin.base().pi_ref(), 0, a).unwrap();
            assert!((value - 1.0 / q).abs() <= 1e-12 * (1.0 / q));
        }
    }

    #[test]
    fn rank_deficient_policy_flags_out_of_range() {
        let lin = basis_instance(&[0.5, 0.5]);
        let pi = Policy::from_rows(vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(
            d2_divergence(&lin, &pi, 0, 1),
            Err(Error::OutOfRangeFeature { s: 0, a: 1 })
        );
        assert!((d2_divergence(&lin, &pi, 0, 0).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let lin = basis_instance(&[0.25, 0.75]);
        let text = lin.to_json();
        assert!(text.contains("\"theta_star\""));
        assert_eq!(LinearBanditInstance::from_json(&text).unwrap(), lin);
    }

    #[test]
    fn theta_outside_ball_rejected() {
        let err = LinearBanditInstance::new(
            vec![vec![vec![1.0]]],
            vec![0.9],
            0.5,
            vec![1.0],
            Table::filled(1, 1, 1.0),
            Noise::Bernoulli,
            RewardRange::default(),
        );
        assert!(matches!(err, Err(Error::ParameterOutOfRange(_))));
    }

    #[test]
    fn induced_reward_out_of_range_is_an_error() {
        let err = LinearBanditInstance::new(
            vec![vec![vec![1.0, 1.0]]],
            vec![0.8, 0.8],
            2.0,
            vec![1.0],
            Table::filled(1, 1, 1.0),
            Noise::Bernoulli,
            RewardRange::default(),
        );
        assert!(matches!(err, Err(Error::RewardOutOfRange { .. })));
    }

    #[test]
    fn radius_formula() {
        let cfg = LinearPcbConfig::default();
        let beta = confidence_radius(100, 3, 2.0, 0.1, cfg);
        let expected = 2.0 * ((3.0 * 401f64.ln() + 20f64.ln()) / 100.0 + 0.01).sqrt();
        assert!((beta - expected).abs() <= 1e-15);
    }

    #[test]
    fn empty_dataset_is_refused() {
        let lin = basis_instance(&[0.5, 0.5]);
        let data = OfflineDataset::empty(0);
        assert!(matches!(
            fkl_pcb_linear(&data, lin.meta(), 1.0, 0.1, LinearPcbConfig::default()),
            Err(Error::PreconditionViolated(_))
        ));
        let greedy = greedy_linear(&data, lin.meta(), 1.0).unwrap();
        assert!(greedy.probs().max_abs_diff(lin.base().pi_ref().probs()) <= 1e-15);
    }

    #[test]
    fn least_squares_single_cell_is_min_norm() {
        let lin = LinearBanditInstance::new(
            vec![vec![vec![1.0, 1.0], vec![1.0, -1.0]]],
            vec![0.5, 0.0],
            1.0,
            vec![1.0],
            Table::filled(1, 2, 0.5),
            Noise::Gaussian,
            RewardRange::default(),
        )
        .unwrap();
        let samples = vec![Sample { s: 0, a: 0, r: 0.8 }; 3];
        let data = OfflineDataset::new(samples, 0, 1, 2).unwrap();
        let theta = least_squares(&data, lin.meta()).unwrap();
        assert!((theta[0] - 0.4).abs() <= 1e-12 && (theta[1] - 0.4).abs() <= 1e-12);
    }
}
