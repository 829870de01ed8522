use std::fs;
use std::process::{Command, Output};

use fkl_core::coverage::build_appendix_b2;
use fkl_core::harness::random_tabular;
use fkl_core::Noise;

fn fkl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fkl")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn tabular_file(dir: &tempfile::TempDir) -> String {
    let path = dir.path().join("inst.json");
    fs::write(&path, random_tabular(2, 3, 1, Noise::Bernoulli).unwrap().to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(fkl(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(fkl(&["solve"]).status.code(), Some(2));
    assert_eq!(fkl(&["solve", "--instance", "/nonexistent.json", "--eta", "1"]).status.code(), Some(2));
    assert_eq!(fkl(&["lower-bound", "--S", "1", "--K", "1", "--n", "10", "--eta", "1"]).status.code(), Some(2));
    let help = fkl(&["rate-experiment", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("n_grid"));
}

#[test]
fn verify_theory_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = fkl(&["verify-theory", "--probes", "100", "--seed", "1", "--report", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
}

#[test]
fn solve_emits_policy_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = fkl(&["solve", "--instance", &tabular_file(&dir), "--eta", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(json["policy"].as_array().unwrap().len(), 2);
    assert_eq!(json["lambda"].as_array().unwrap().len(), 2);
    assert!(json["residuals"][0].as_f64().unwrap().abs() <= 1e-12);
}

#[test]
fn run_tabular_record() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tabular_file(&dir);
    let args = ["run-tabular", "--instance", inst.as_str(), "--n", "500", "--eta", "2", "--seed", "3"];
    let out = fkl(&args);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("{\"policy\""));
    assert_eq!(lines[1], "algo,n,eta,delta,seed,subopt");
    assert!(lines[2].starts_with("fkl-pcb,500,2,0.1,3,"));
    assert_eq!(stdout(&fkl(&args)), text);
}

#[test]
fn run_linear_with_supplied_data() {
    let dir = tempfile::tempdir().unwrap();
    let inst_path = dir.path().join("lin.json");
    fs::write(&inst_path, build_appendix_b2(4.0, 2.0).unwrap().to_json()).unwrap();
    let data_path = dir.path().join("data.csv");
    fs::write(&data_path, "s,a,r\n0,0,1.1\n0,1,0.9\n0,2,2.2\n0,0,0.8\n").unwrap();
    let out = fkl(&[
        "run-linear", "--instance", inst_path.to_str().unwrap(), "--eta", "2", "--algorithm", "greedy",
        "--data", data_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).lines().nth(2).unwrap().starts_with("greedy,4,2,"));
}

#[test]
fn rate_experiment_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"instance": {"builder": {"name": "random-tabular", "S": 2, "A": 2, "seed": 0}},
            "algorithm": "fkl-pcb", "n_grid": [50, 100, 200, 400], "trials": 10,
            "eta": 2.0, "delta": 0.1, "seed": 7}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let stamped = stdout(&fkl(&["rate-experiment", "--config", cfg]));
    assert!(stamped.starts_with("# generated at unix time"));
    let a = fkl(&["--deterministic", "rate-experiment", "--config", cfg, "--robust"]);
    let b = fkl(&["rate-experiment", "--config", cfg, "--robust", "--deterministic", "--threads", "1"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,mean_subopt,stderr,pess_freq,median_subopt"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("50,"));
    assert_eq!(stamped.lines().nth(1), Some("n,mean_subopt,stderr,pess_freq"));
}

#[test]
fn lower_bound_csv() {
    let args = ["--deterministic", "lower-bound", "--S", "1", "--K", "1", "--n", "4096", "--eta", "2", "--trials", "3",
        "--estimator", "greedy"];
    let out = fkl(&args);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "v_index,trial,subopt");
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert_eq!(stdout(&fkl(&args)), text);
}

#[test]
fn coverage_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let lin = dir.path().join("lin.json");
    fs::write(&lin, build_appendix_b2(8.0, 2.0).unwrap().to_json()).unwrap();
    let out = fkl(&["coverage", "--instance", lin.to_str().unwrap(), "--eta", "2"]);
    let json: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(json["d2_pistar"]["kind"], "finite");
    assert!(json["c_pistar"]["value"].as_f64().unwrap() >= 4.0);

    let out = fkl(&["coverage", "--instance", &tabular_file(&dir), "--eta", "2"]);
    let json: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!(json.get("d2_pistar").is_none());
}

#[test]
fn library_entry_point() {
    assert_eq!(fkl_cli::run(["fkl", "--bogus"]), 2);
    assert_eq!(fkl_cli::run(["fkl", "--help"]), 0);
}
