use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::builders::BuiltInstance;
use super::config::{Algorithm, ExperimentConfig};
use crate::error::{Error, Result};
use crate::estimators::{fit_fkl_pcb_linear, fit_fkl_pcb_tabular, greedy_linear, greedy_tabular};
use crate::instance::{sample_dataset, OfflineDataset, Policy};
use crate::rng::derive_seed;
use crate::solver::SubOptEvaluator;
use crate::table::Table;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub mean_subopt: f64,
    pub stderr: f64,
    /// Fraction of trials whose pessimistic rewards lie below the truth everywhere.
    pub pess_freq: f64,
    pub median_subopt: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Twice the OLS standard error of the slope; infinite with two points.
    pub halfwidth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub algorithm: String,
    pub model: String,
    pub rows: Vec<RateRow>,
    pub fit: SlopeFit,
}

/// OLS of `log mean` on `log n`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::PreconditionViolated("slope fit needs at least two rows".into()));
    }
    if let Some(&(_, m)) = points.iter().find(|(_, m)| !(*m > 0.0)) {
        return Err(Error::NonPositiveMean(m));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, m)| m.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::PreconditionViolated("slope fit needs distinct n values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let halfwidth = if points.len() > 2 {
        let ssr: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        2.0 * (ssr / (k - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(SlopeFit {
        slope,
        intercept,
        halfwidth,
    })
}

fn below(estimate: &Table, truth: &Table) -> bool {
    estimate
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .all(|(e, t)| e <= t)
}

/// Learner output and whether its pessimistic rewards undercut the truth.
fn run_trial(cfg: &ExperimentConfig, built: &BuiltInstance, data: &OfflineDataset) -> Result<(Policy, bool)> {
    let truth = built.base().reward_mean();
    match built {
        BuiltInstance::Tabular(inst) => {
            let (est, sol) = fit_fkl_pcb_tabular(data, inst.meta(), cfg.eta, cfg.delta)?;
            let policy = match cfg.algorithm {
                Algorithm::FklPcb => sol.policy,
                Algorithm::Greedy => greedy_tabular(data, inst.meta(), cfg.eta)?,
            };
            Ok((policy, est.is_pessimistic(truth)))
        }
        BuiltInstance::Linear(lin) => {
            let (est, sol) = fit_fkl_pcb_linear(data, lin.meta(), cfg.eta, cfg.delta, cfg.linear_config())?;
            let policy = match cfg.algorithm {
                Algorithm::FklPcb => sol.policy,
                Algorithm::Greedy => greedy_linear(data, lin.meta(), cfg.eta)?,
            };
            Ok((policy, below(&est.r_pess, truth)))
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Per-n trial outcomes `(subopt, pessimism held)` in trial order.
pub fn rate_trials(cfg: &ExperimentConfig, built: &BuiltInstance) -> Result<Vec<Vec<(f64, bool)>>> {
    cfg.validate()?;
    let evaluator = SubOptEvaluator::new(built.base(), cfg.eta)?;
    cfg.n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = derive_seed(cfg.seed, &[i as u64, t as u64]);
                    let data = sample_dataset(built.base(), n, seed);
                    run_trial(cfg, built, &data)
                        .and_then(|(pi, held)| Ok((evaluator.eval(&pi)?, held)))
                        .map_err(|e| Error::Trial {
                            seed,
                            source: Box::new(e),
                        })
                })
                .collect()
        })
        .collect()
}

/// Runs every trial on the n grid and fits the log-log slope of the means.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<RateReport> {
    let built = cfg.instance.build(cfg.eta)?;
    let outcomes = rate_trials(cfg, &built)?;
    let rows: Vec<RateRow> = cfg
        .n_grid
        .iter()
        .zip(outcomes)
        .map(|(&n, trials)| summarize(n, &trials))
        .collect();
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.mean_subopt)).collect();
    Ok(RateReport {
        algorithm: cfg.algorithm.name().into(),
        model: match built {
            BuiltInstance::Tabular(_) => "tabular".into(),
            BuiltInstance::Linear(_) => "linear".into(),
        },
        fit: fit_loglog_slope(&points)?,
        rows,
    })
}

fn summarize(n: usize, trials: &[(f64, bool)]) -> RateRow {
    let k = trials.len() as f64;
    let mut values: Vec<f64> = trials.iter().map(|t| t.0).collect();
    let mean = values.iter().sum::<f64>() / k;
    let var = if trials.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    RateRow {
        n,
        mean_subopt: mean,
        stderr: (var / k).sqrt(),
        pess_freq: trials.iter().filter(|t| t.1).count() as f64 / k,
        median_subopt: median(&mut values),
    }
}

/// Twelve significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.11e}")
}

/// Header line prefixed with `#`, carrying the wall-clock generation time.
pub fn timestamp_line() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    format!("# generated at unix time {secs}\n")
}

/// `n,mean_subopt,stderr,pess_freq[,median_subopt]`.
pub fn write_rate_csv<W: Write>(report: &RateReport, mut out: W, robust: bool, deterministic: bool) -> Result<()> {
    if !deterministic {
        out.write_all(timestamp_line().as_bytes())?;
    }
    let mut header = String::from("n,mean_subopt,stderr,pess_freq");
    if robust {
        header.push_str(",median_subopt");
    }
    writeln!(out, "{header}")?;
    for row in &report.rows {
        write!(
            out,
            "{},{},{},{}",
            row.n,
            format_float(row.mean_subopt),
            format_float(row.stderr),
            format_float(row.pess_freq)
        )?;
        if robust {
            write!(out, ",{}", format_float(row.median_subopt))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..7).map(|k| 1024.0 * 2f64.powi(k)).collect()
    }

    #[test]
    fn exact_power_laws() {
        let inv: Vec<(f64, f64)> = grid().into_iter().map(|n| (n, 7.0 / n)).collect();
        assert!((fit_loglog_slope(&inv).unwrap().slope + 1.0).abs() <= 1e-6);
        let root: Vec<(f64, f64)> = grid().into_iter().map(|n| (n, 3.0 / n.sqrt())).collect();
        assert!((fit_loglog_slope(&root).unwrap().slope + 0.5).abs() <= 1e-6);
    }

    #[test]
    fn two_points_and_constants() {
        let fit = fit_loglog_slope(&[(10.0, 1.0), (100.0, 0.1)]).unwrap();
        assert!((fit.slope + 1.0).abs() <= 1e-12);
        assert!(fit.halfwidth.is_infinite());
        let flat = fit_loglog_slope(&[(10.0, 2.0), (20.0, 2.0), (40.0, 2.0)]).unwrap();
        assert!(flat.slope.abs() <= 1e-12);
        assert_eq!(flat.halfwidth, 0.0);
    }

    #[test]
    fn rejects_nonpositive_means() {
        assert_eq!(
            fit_loglog_slope(&[(10.0, 1.0), (20.0, 0.0)]),
            Err(Error::NonPositiveMean(0.0))
        );
        assert!(fit_loglog_slope(&[(10.0, 1.0)]).is_err());
    }

    #[test]
    fn float_format_has_twelve_digits() {
        assert_eq!(format_float(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(format_float(1024.0), "1.02400000000e3");
    }
}
