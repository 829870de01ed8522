//! Experiment orchestration: instance builders, configuration, rate
//! experiments with log-log slope fits, and CSV output.
//!
//! Trial `t` at grid index `i` uses `derive_seed(master, [i, t])`; see
//! [`crate::rng`] for the hash.

mod builders;
mod config;
mod rate;

pub use builders::{random_linear, random_tabular, BuilderSpec, BuiltInstance};
pub use config::{Algorithm, ExperimentConfig, InstanceSource};
pub use rate::{
    fit_loglog_slope, format_float, rate_trials, run_rate_experiment, timestamp_line,
    write_rate_csv, RateReport, RateRow, SlopeFit,
};
