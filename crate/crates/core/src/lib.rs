//! Forward-KL-regularized offline contextual bandits.
//!
//! The crate covers the exact regularized optimum, pessimistic tabular and
//! linear learners, coverage coefficients, hard instances for lower bounds,
//! numeric checks of the underlying convex-analytic identities, and a small
//! experiment harness for rate measurements.
//!
//! ```
//! use fkl_core::{optimal_policy, BanditInstance, Noise, Table};
//!
//! let inst = BanditInstance::uniform(Table::filled(1, 3, 0.5), Noise::Bernoulli).unwrap();
//! let opt = optimal_policy(&inst, 2.0).unwrap();
//! assert!((opt.lambda[0] - 1.0).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coverage;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod instance;
pub mod lowerbound;
pub mod rng;
pub mod solver;
pub mod table;
pub mod theory;

pub use coverage::{Coverage, CoverageReport};
pub use error::{Error, Result};
pub use estimators::{
    fkl_pcb_linear, fkl_pcb_tabular, LinearBanditInstance, LinearPessimisticEstimate,
    PessimisticEstimate,
};
pub use harness::{ExperimentConfig, RateReport};
pub use instance::{
    sample_dataset, validate_instance, BanditInstance, InstanceMeta, Noise, OfflineDataset,
    Policy, RawInstance, RewardRange, Sample,
};
pub use lowerbound::{EstimatorKind, HardFamily, SignPattern};
pub use solver::{
    objective, optimal_policy, solve_lambda, solve_rewards, suboptimality, RegularizedSolution,
    SubOptEvaluator,
};
pub use table::Table;
pub use theory::{ConjugateProbe, MeanValueCurve};
