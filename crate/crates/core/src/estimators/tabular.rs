use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{InstanceMeta, OfflineDataset, Policy};
use crate::solver::{solve_rewards, RegularizedSolution};
use crate::table::Table;

/// Per-cell statistics of a tabular offline dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PessimisticEstimate {
    pub counts: Vec<Vec<u64>>,
    pub r_hat: Table,
    pub bonus: Table,
    pub r_pess: Table,
    pub delta: f64,
}

impl PessimisticEstimate {
    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[s][a]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Whether `r_pess <= r` holds in every cell.
    pub fn is_pessimistic(&self, rewards: &Table) -> bool {
        self.r_pess
            .as_slice()
            .iter()
            .zip(rewards.as_slice())
            .all(|(p, r)| p <= r)
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDelta(delta))
    }
}

/// `sqrt(4 log(2SA/delta) / N)`.
pub fn tabular_bonus(count: u64, num_cells: usize, delta: f64) -> f64 {
    if count == 0 {
        1.0
    } else {
        (4.0 * (2.0 * num_cells as f64 / delta).ln() / count as f64).sqrt()
    }
}

fn accumulate(
    data: &OfflineDataset,
    num_contexts: usize,
    num_actions: usize,
) -> Result<(Vec<Vec<u64>>, Table)> {
    let mut counts = vec![vec![0u64; num_actions]; num_contexts];
    let mut sums = Table::zeros(num_contexts, num_actions);
    for sample in data.samples() {
        if sample.s >= num_contexts || sample.a >= num_actions {
            return Err(Error::Shape(format!(
                "sample ({}, {}) outside {num_contexts}x{num_actions}",
                sample.s, sample.a
            )));
        }
        counts[sample.s][sample.a] += 1;
        let cell = sums.get(sample.s, sample.a);
        sums.set(sample.s, sample.a, cell + sample.r);
    }
    let means = Table::from_fn(num_contexts, num_actions, |s, a| match counts[s][a] {
        0 => 0.0,
        n => sums.get(s, a) / n as f64,
    });
    Ok((counts, means))
}

/// Empirical means, counts and Hoeffding-style bonuses.
pub fn fit_tabular(
    data: &OfflineDataset,
    num_contexts: usize,
    num_actions: usize,
    delta: f64,
) -> Result<PessimisticEstimate> {
    check_delta(delta)?;
    let (counts, r_hat) = accumulate(data, num_contexts, num_actions)?;
    let cells = num_contexts * num_actions;
    let bonus = Table::from_fn(num_contexts, num_actions, |s, a| {
        tabular_bonus(counts[s][a], cells, delta)
    });
    let r_pess = r_hat.zip_with(&bonus, |r, b| r - b)?;
    Ok(PessimisticEstimate {
        counts,
        r_hat,
        bonus,
        r_pess,
        delta,
    })
}

/// Pessimistic tabular learner; returns the estimate along with the solution.
pub fn fit_fkl_pcb_tabular(
    data: &OfflineDataset,
    meta: InstanceMeta<'_>,
    eta: f64,
    delta: f64,
) -> Result<(PessimisticEstimate, RegularizedSolution)> {
    let est = fit_tabular(data, meta.num_contexts(), meta.num_actions(), delta)?;
    let solution = solve_rewards(&est.r_pess, meta.pi_ref, eta)?;
    Ok((est, solution))
}

pub fn fkl_pcb_tabular(
    data: &OfflineDataset,
    meta: InstanceMeta<'_>,
    eta: f64,
    delta: f64,
) -> Result<Policy> {
    fit_fkl_pcb_tabular(data, meta, eta, delta).map(|(_, sol)| sol.policy)
}

/// Plug-in learner on the empirical means, with unvisited cells at zero.
pub fn greedy_tabular(data: &OfflineDataset, meta: InstanceMeta<'_>, eta: f64) -> Result<Policy> {
    let (_, r_hat) = accumulate(data, meta.num_contexts(), meta.num_actions())?;
    Ok(solve_rewards(&r_hat, meta.pi_ref, eta)?.policy)
}

/// Whether `1 / max(N, 1) <= 8 log(2SA/delta) / (n rho(s) pi_ref(a|s))` in every cell.
pub fn count_event_holds(est: &PessimisticEstimate, meta: InstanceMeta<'_>) -> bool {
    let n = est.total() as f64;
    let cells = (meta.num_contexts() * meta.num_actions()) as f64;
    let log_term = (2.0 * cells / est.delta).ln();
    (0..meta.num_contexts()).all(|s| {
        (0..meta.num_actions()).all(|a| {
            let visits = est.count(s, a).max(1) as f64;
            let coverage = n * meta.rho[s] * meta.pi_ref.prob(s, a);
            coverage <= 8.0 * log_term * visits
        })
    })
}
