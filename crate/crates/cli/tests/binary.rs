//! The `ngdrate` binary end to end: outputs, files and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ngdrate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ngdrate"))
        .args(args)
        .env("NGDRATE_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.cfg");
    let text = format!(
        "schedule.d = 2\n\
         schedule.alpha1 = 1\n\
         schedule.alpha2 = 2\n\
         schedule.gamma = 1\n\
         noise.U = 0.2\n\
         ngd.eta = 0.5\n\
         ngd.horizon = 2\n\
         baselines.estimators = knn, nw\n\
         baselines.folds = 3\n\
         sweep.n = 16, 24, 32\n\
         sweep.replicates = 2\n\
         risk.n_test = 500\n\
         output.dir = {}\n",
        dir.join("out").display()
    );
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn check_accepts_a_valid_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = ngdrate(&["check", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("# assumptions hold"));
    assert!(text.contains("schedule.d = 2"));
}

#[test]
fn validation_errors_exit_with_one_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "schedule.d = 2\nschedule.s = 2\n").unwrap();
    let out = ngdrate(&["check", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");

    fs::write(&cfg, "schedule.depth = 2\n").unwrap();
    assert_eq!(ngdrate(&["check", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn missing_files_are_runtime_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let missing = dir.path().join("absent.csv");
    let out = ngdrate(&["train", &cfg, "--data", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_train_and_fit_share_the_cell_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let data = dir.path().join("cell.csv");
    let out = ngdrate(&["data", &cfg, "--n", "24", "--replicate", "1", "--out", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let again = ngdrate(&["data", &cfg, "--n", "24", "--replicate", "1"]);
    assert_eq!(stdout(&again), fs::read_to_string(&data).unwrap());

    let run = dir.path().join("run");
    let out = ngdrate(&["train", &cfg, "--data", data.to_str().unwrap(), "--out", run.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("beta = 24"));
    for f in ["trace.csv", "averaged.txt", "last.txt"] {
        assert!(run.join(f).exists(), "{f}");
    }

    let model = dir.path().join("krr.txt");
    let out = ngdrate(&["fit", &cfg, "--data", data.to_str().unwrap(), "--estimator", "krr-rbf", "--out", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("selected = "));
    assert!(model.exists());
}

#[test]
fn sweep_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = ngdrate(&["sweep", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("cells_computed = 6"));
    let rerun = ngdrate(&["sweep", &cfg]);
    assert!(stdout(&rerun).contains("cells_computed = 0"));

    let results = dir.path().join("out").join("results.csv");
    let plots = dir.path().join("plots");
    let out = ngdrate(&["report", results.to_str().unwrap(), "--config", &cfg, "--plots", plots.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    for est in ["ngd", "knn", "nw"] {
        assert!(text.lines().any(|l| l.starts_with(est)), "{text}");
        assert!(plots.join(format!("plot_{est}.dat")).exists());
    }
    assert!(text.contains("nn_upper_exponent"));
}

#[test]
fn lemma_reports_monotonicity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lemma.cfg");
    fs::write(&cfg, "lemma.d_w = 1, 2\nlemma.grid = 33\n").unwrap();
    let out = ngdrate(&["lemma", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("relative_error_non_increasing = "));
    assert!(dir.path().join("lemma_dw2.csv").exists());
}
