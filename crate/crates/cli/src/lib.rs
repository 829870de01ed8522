//! The `fkl` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a computation or verification fails,
//! 2 on usage errors (bad flags, unreadable or malformed input files).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fkl_core::coverage::coverage_report;
use fkl_core::estimators::{fit_fkl_pcb_linear, fit_fkl_pcb_tabular, greedy_linear, greedy_tabular, LinearPcbConfig};
use fkl_core::harness::{format_float, run_rate_experiment, write_rate_csv};
use fkl_core::lowerbound::{estimator_risks, RiskConfig};
use fkl_core::theory::{run_theory_suite, TheorySuiteConfig};
use fkl_core::{
    optimal_policy, sample_dataset, BanditInstance, Error, EstimatorKind, ExperimentConfig, HardFamily,
    LinearBanditInstance, OfflineDataset, Policy, SubOptEvaluator,
};
use serde_json::json;

const CONFIG_HELP: &str = "\
Config JSON (see docs/config.md):
  instance     {\"inline\": <instance>} | {\"inline-linear\": <linear instance>}
               | {\"builder\": {\"name\": <builder>, ...params}}
               builders: random-tabular {S, A, seed, noise?}, random-linear {S, A, d, seed},
                         hard-family {S, K, n_target, v_index?}, two-arm {c, mirrored?},
                         appendix-b1 {C, A}, appendix-b2 {C}
  algorithm    \"fkl-pcb\" | \"greedy\"
  n_grid       strictly increasing sample sizes, at least 4
  trials       trials per sample size, at least 1
  eta          inverse regularization strength, > 0
  delta        confidence level in (0, 1)
  c_beta       linear confidence-radius constant (default 2)
  eps_cover    linear covering slack (default 1/n)
  seed         master seed
  output       CSV path (default: standard output)";

#[derive(Parser, Debug)]
#[command(name = "fkl", version, about = "Forward-KL-regularized offline bandit experiments")]
pub struct Cli {
    /// Suppress the timestamp header line so output is byte-reproducible.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact regularized optimum of an instance: policy, multipliers and residuals as JSON.
    Solve {
        /// Instance JSON file.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        eta: f64,
    },
    /// Tabular learner on sampled (or supplied) data; prints the policy JSON and a CSV record.
    RunTabular(RunArgs),
    /// Linear learner on sampled (or supplied) data; prints the policy JSON and a CSV record.
    RunLinear {
        #[command(flatten)]
        run: RunArgs,
        /// Confidence-radius constant.
        #[arg(long, default_value_t = 2.0)]
        c_beta: f64,
        /// Covering slack added under the square root (default 1/n).
        #[arg(long)]
        eps_cover: Option<f64>,
    },
    /// Runs a rate experiment and writes "n,mean_subopt,stderr,pess_freq" CSV.
    #[command(after_long_help = CONFIG_HELP)]
    RateExperiment {
        /// Experiment config JSON file.
        #[arg(long)]
        config: PathBuf,
        /// Append a median_subopt column.
        #[arg(long)]
        robust: bool,
    },
    /// Runs the identity-check suite; exits 1 if any check fails.
    VerifyTheory {
        #[arg(long, default_value_t = 200)]
        probes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the full report as JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Risk of one estimator over the contextual hard family as "v_index,trial,subopt" CSV.
    LowerBound {
        #[arg(long = "S")]
        contexts: usize,
        /// Arm pairs per context (A = 2K).
        #[arg(long = "K")]
        pairs: usize,
        /// Sample size, also used to set the perturbation c = sqrt(SA/n).
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = EstimatorArg::FklPcb)]
        estimator: EstimatorArg,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Patterns drawn when the family exceeds exhaustive enumeration.
        #[arg(long, default_value_t = 64)]
        sampled_patterns: usize,
    },
    /// Coverage coefficients of an instance (tabular or linear) as JSON.
    Coverage {
        /// Instance JSON file; linear instances also report the D^2 coverage.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        eta: f64,
    },
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Instance JSON file.
    #[arg(long)]
    pub instance: PathBuf,
    /// Sample size; ignored when --data is given.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::FklPcb)]
    pub algorithm: AlgorithmArg,
    /// Dataset CSV with header "s,a,r" instead of sampling.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AlgorithmArg {
    FklPcb,
    Greedy,
}

impl AlgorithmArg {
    fn name(self) -> &'static str {
        match self {
            AlgorithmArg::FklPcb => "fkl-pcb",
            AlgorithmArg::Greedy => "greedy",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EstimatorArg {
    FklPcb,
    Greedy,
    Uniform,
    Oracle,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::FklPcb => EstimatorKind::FklPcb,
            EstimatorArg::Greedy => EstimatorKind::Greedy,
            EstimatorArg::Uniform => EstimatorKind::Uniform,
            EstimatorArg::Oracle => EstimatorKind::Oracle,
        }
    }
}

/// Failure of one invocation, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse(_) | Error::Io(_) => CliError::Usage(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<BanditInstance, CliError> {
    Ok(BanditInstance::from_json(&read_file(path)?)?)
}

fn load_linear(path: &Path) -> Result<LinearBanditInstance, CliError> {
    Ok(LinearBanditInstance::from_json(&read_file(path)?)?)
}

fn policy_rows(policy: &Policy) -> Vec<Vec<f64>> {
    (0..policy.num_contexts()).map(|s| policy.row(s).to_vec()).collect()
}

fn load_data(args: &RunArgs, inst: &BanditInstance) -> Result<OfflineDataset, CliError> {
    match &args.data {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            Ok(OfflineDataset::read_csv(file, args.seed, inst.num_contexts(), inst.num_actions())?)
        }
        None => Ok(sample_dataset(inst, args.n, args.seed)),
    }
}

fn report_run(
    out: &mut dyn Write,
    args: &RunArgs,
    inst: &BanditInstance,
    data: &OfflineDataset,
    policy: &Policy,
) -> Result<(), CliError> {
    let subopt = SubOptEvaluator::new(inst, args.eta)?.eval(policy)?;
    writeln!(out, "{}", json!({ "policy": policy_rows(policy) }))?;
    writeln!(out, "algo,n,eta,delta,seed,subopt")?;
    writeln!(
        out,
        "{},{},{},{},{},{}",
        args.algorithm.name(),
        data.len(),
        args.eta,
        args.delta,
        args.seed,
        format_float(subopt)
    )?;
    Ok(())
}

/// Executes one parsed command, writing results to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match cli.command {
        Command::Solve { instance, eta } => {
            let inst = load_instance(&instance)?;
            let sol = optimal_policy(&inst, eta)?;
            let doc = json!({
                "policy": policy_rows(&sol.policy),
                "lambda": sol.lambda,
                "residuals": sol.residuals,
            });
            writeln!(out, "{doc}")?;
        }
        Command::RunTabular(args) => {
            let inst = load_instance(&args.instance)?;
            let data = load_data(&args, &inst)?;
            let policy = match args.algorithm {
                AlgorithmArg::FklPcb => fit_fkl_pcb_tabular(&data, inst.meta(), args.eta, args.delta)?.1.policy,
                AlgorithmArg::Greedy => greedy_tabular(&data, inst.meta(), args.eta)?,
            };
            report_run(out, &args, &inst, &data, &policy)?;
        }
        Command::RunLinear { run, c_beta, eps_cover } => {
            let lin = load_linear(&run.instance)?;
            let data = load_data(&run, lin.base())?;
            let policy = match run.algorithm {
                AlgorithmArg::FklPcb => {
                    let cfg = LinearPcbConfig { c_beta, eps_cover };
                    fit_fkl_pcb_linear(&data, lin.meta(), run.eta, run.delta, cfg)?.1.policy
                }
                AlgorithmArg::Greedy => greedy_linear(&data, lin.meta(), run.eta)?,
            };
            report_run(out, &run, lin.base(), &data, &policy)?;
        }
        Command::RateExperiment { config, robust } => {
            let cfg = ExperimentConfig::from_json(&read_file(&config)?)?;
            let report = run_rate_experiment(&cfg)?;
            let mut buf = Vec::new();
            write_rate_csv(&report, &mut buf, robust, cli.deterministic)?;
            match &cfg.output {
                Some(path) => write_file(path, &buf)?,
                None => out.write_all(&buf)?,
            }
        }
        Command::VerifyTheory { probes, seed, report } => {
            let result = run_theory_suite(TheorySuiteConfig::new(probes, seed))?;
            for check in &result.checks {
                let bound = if check.sense == "max" { "<=" } else { ">=" };
                writeln!(
                    out,
                    "{} {}: worst {:.3e} {bound} {:.1e} over {} cases",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.worst,
                    check.tolerance,
                    check.cases
                )?;
            }
            match &result.sign_witness {
                Some(w) => writeln!(out, "F' sign witness at u = {} (F' = {:.3e})", w.u_positive, w.f_prime_positive)?,
                None => writeln!(out, "no F' sign witness found")?,
            }
            if let Some(path) = report {
                let text = serde_json::to_string_pretty(&result).map_err(|e| CliError::Failed(e.to_string()))?;
                write_file(&path, text.as_bytes())?;
            }
            if !result.passed {
                return Err(CliError::Failed("theory suite failed".into()));
            }
        }
        Command::LowerBound { contexts, pairs, n, eta, trials, seed, estimator, delta, sampled_patterns } => {
            let family = HardFamily::new(contexts, pairs, n, eta).map_err(|e| CliError::Usage(e.to_string()))?;
            let cfg = RiskConfig { n, trials, seed, delta, sampled_patterns };
            let reports = estimator_risks(&family, &cfg, &[estimator.into()])?;
            if !cli.deterministic {
                out.write_all(fkl_core::harness::timestamp_line().as_bytes())?;
            }
            writeln!(out, "v_index,trial,subopt")?;
            for s in &reports[0].samples {
                writeln!(out, "{},{},{}", s.v_index, s.trial, format_float(s.subopt))?;
            }
        }
        Command::Coverage { instance, eta } => {
            let text = read_file(&instance)?;
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(e.to_string()))?;
            let report = if value.get("features").is_some() {
                let lin = LinearBanditInstance::from_json(&text)?;
                coverage_report(lin.base(), eta, None, Some(&lin))?
            } else {
                let inst = BanditInstance::from_json(&text)?;
                coverage_report(&inst, eta, None, None)?
            };
            let text = serde_json::to_string(&report).map_err(|e| CliError::Failed(e.to_string()))?;
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs it, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(Error::Config("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::NonPositiveEta(0.0)).exit_code(), 1);
    }

    #[test]
    fn upper_case_flags_parse() {
        let cli = Cli::try_parse_from(["fkl", "lower-bound", "--S", "2", "--K", "3", "--n", "9000", "--eta", "1"]).unwrap();
        assert!(matches!(cli.command, Command::LowerBound { contexts: 2, pairs: 3, .. }));
    }
}
