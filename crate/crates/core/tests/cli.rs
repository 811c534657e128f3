//! Black-box tests of the command-line binary: exit codes, error wording,
//! artifact formats, flag/config precedence, and byte-level determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mirrorlang"))
}

fn run_args(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, contents: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, contents).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn config_errors_exit_with_code_2_and_name_the_offender() {
    let tmp = tempfile::tempdir().unwrap();

    // Unknown key in the config file.
    let cfg = write_config(tmp.path(), r#"{"trails": 100}"#);
    let out = run_args(&["synthetic-dirichlet", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("trails"), "stderr: {}", stderr(&out));

    // Non-positive count.
    let out = run_args(&["synthetic-dirichlet", "--trials", "-5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("trials"), "stderr: {}", stderr(&out));

    // Mini-batch sampler without a batch size.
    let out = run_args(&["synthetic-dirichlet", "--sampler", "smld", "--trials", "8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("batch_size"), "stderr: {}", stderr(&out));

    // Batch size with a full-gradient sampler.
    let out = run_args(&["synthetic-dirichlet", "--batch-size", "64", "--trials", "8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("batch_size"), "stderr: {}", stderr(&out));

    // Unknown sampler name.
    let out = run_args(&["synthetic-dirichlet", "--sampler", "hmc"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sampler"), "stderr: {}", stderr(&out));

    // Unparseable JSON.
    let cfg = write_config(tmp.path(), "{not json");
    let out = run_args(&["synthetic-dirichlet", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));

    // A grid on an experiment that takes a single step size.
    let out = run_args(&["synthetic-dirichlet", "--beta-grid", "1e-4,1e-3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("beta_grid"), "stderr: {}", stderr(&out));

    // Unparseable flag values are usage errors too.
    let out = run_args(&["synthetic-dirichlet", "--beta", "abc"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diverged_chains_exit_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = run_args(&[
        "synthetic-dirichlet",
        "--sampler",
        "sgrld",
        "--beta",
        "10",
        "--trials",
        "4",
        "--iters",
        "2000",
        "--bins",
        "10",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("diverged"), "stderr: {}", stderr(&out));
}

fn small_run(out_dir: &Path, extra: &[&str]) -> Output {
    let mut cmd = bin();
    cmd.args([
        "synthetic-dirichlet",
        "--trials",
        "300",
        "--iters",
        "60",
        "--bins",
        "20",
        "--beta",
        "2e-4",
        "--out",
    ]);
    cmd.arg(out_dir);
    cmd.args(extra);
    cmd.output().expect("binary runs")
}

#[test]
fn reruns_write_byte_identical_csv_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir_a, dir_b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(small_run(&dir_a, &[]).status.success());
    assert!(small_run(&dir_b, &[]).status.success());

    let curve_a = fs::read(dir_a.join("curve.csv")).unwrap();
    let curve_b = fs::read(dir_b.join("curve.csv")).unwrap();
    assert_eq!(curve_a, curve_b);

    // Metadata agrees except for the wall-clock measurement.
    let mut meta_a: serde_json::Value =
        serde_json::from_slice(&fs::read(dir_a.join("metadata.json")).unwrap()).unwrap();
    let mut meta_b: serde_json::Value =
        serde_json::from_slice(&fs::read(dir_b.join("metadata.json")).unwrap()).unwrap();
    for meta in [&mut meta_a, &mut meta_b] {
        let removed = meta.as_object_mut().unwrap().remove("wall_time_seconds");
        assert!(removed.is_some(), "metadata is missing wall_time_seconds");
    }
    assert_eq!(meta_a, meta_b);
}

#[test]
fn seed_flag_overrides_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"seed": 7}"#);

    let dir_file = tmp.path().join("file");
    let dir_flag = tmp.path().join("flag");
    let dir_bare = tmp.path().join("bare");
    assert!(small_run(&dir_file, &["--config", &cfg]).status.success());
    assert!(small_run(&dir_flag, &["--config", &cfg, "--seed", "13"]).status.success());
    assert!(small_run(&dir_bare, &["--seed", "13"]).status.success());

    let curve = |d: &Path| fs::read(d.join("curve.csv")).unwrap();
    // The flag wins over the file: seeds 13 and 13 agree, 7 and 13 differ.
    assert_eq!(curve(&dir_flag), curve(&dir_bare));
    assert_ne!(curve(&dir_file), curve(&dir_flag));

    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(dir_flag.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["seed"], serde_json::json!(13));
}

#[test]
fn artifacts_have_the_documented_headers() {
    let tmp = tempfile::tempdir().unwrap();

    let dir = tmp.path().join("synthetic");
    let cfg = write_config(tmp.path(), r#"{"trace": true, "trials": 4}"#);
    let out = run_args(&[
        "synthetic-dirichlet",
        "--config",
        &cfg,
        "--iters",
        "30",
        "--bins",
        "10",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let first_line = |p: &Path| -> String {
        let text = fs::read_to_string(p).unwrap();
        text.lines().next().unwrap_or_default().to_owned()
    };
    assert_eq!(first_line(&dir.join("curve.csv")), "iter,tv");
    assert_eq!(first_line(&dir.join("trace.csv")), "chain,iter,coord,value");

    let dir = tmp.path().join("grid");
    let out = run_args(&[
        "grid-search",
        "--beta-grid",
        "1e-4,1e-3",
        "--trials",
        "200",
        "--iters",
        "40",
        "--bins",
        "10",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert_eq!(first_line(&dir.join("ranking.csv")), "beta,final_tv,slope");
    assert_eq!(first_line(&dir.join("curve_rank1.csv")), "iter,tv");

    let dir = tmp.path().join("cir");
    let out = run_args(&[
        "cir-demo",
        "--steps" ,
        "5000",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert_eq!(first_line(&dir.join("moments.csv")), "beta,mean,var");

    let dir = tmp.path().join("burg");
    let out = run_args(&["burg-demo", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert_eq!(first_line(&dir.join("curvature_exponential.csv")), "y,w2_closed,w2_fd,sign");
    assert_eq!(first_line(&dir.join("curvature_gaussian.csv")), "y,w2_closed,w2_fd,sign");

    let dir = tmp.path().join("product");
    let out = run_args(&[
        "product-simplex",
        "--trials",
        "200",
        "--iters",
        "40",
        "--bins",
        "10",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert_eq!(first_line(&dir.join("curve.csv")), "iter,tv");
}

#[test]
fn stdout_reports_the_experiment_results_and_written_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let out = small_run(&dir, &[]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("experiment: synthetic-dirichlet"), "stdout: {text}");
    let results_line = text
        .lines()
        .find(|l| l.starts_with("results: "))
        .expect("results line present");
    let parsed: serde_json::Value =
        serde_json::from_str(results_line.trim_start_matches("results: ")).unwrap();
    assert!(parsed["final_tv"].is_number());
    assert!(text.lines().filter(|l| l.starts_with("wrote ")).count() >= 2, "stdout: {text}");

    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("metadata.json")).unwrap()).unwrap();
    assert!(meta["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(meta["config"]["trials"], serde_json::json!(300));
    assert_eq!(meta["config"]["experiment"], serde_json::json!("synthetic-dirichlet"));
    let files: Vec<String> = meta["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_owned())
        .collect();
    assert!(files.contains(&"curve.csv".to_owned()));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = run_args(&["synthetic-dirichlet", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
}
