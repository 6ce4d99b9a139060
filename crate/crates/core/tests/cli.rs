//! The `decum` binary: outputs, exit codes and error messages.

use std::path::Path;
use std::process::{Command, Output};

use decumulation::policy_net::{he_init, Checkpoint};

const SMALL: &str = r#"
[simulation]
train_paths = 200
test_paths = 100

[training]
iterations = 3
batch_size = 32
checkpoint_every = 1
"#;

fn decum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decum")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(decum(&[]).status.code(), Some(2));
    assert_eq!(decum(&["simulate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out").display().to_string();
    assert_eq!(decum(&["train", "--out", &out, "--bogus"]).status.code(), Some(2));

    let cfg = write(dir.path(), "bad.toml", "[training]\nlearning_rat = 0.1\n");
    let o = decum(&["train", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("learning_rat"));
}

#[test]
fn missing_history_column_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "h.csv", "year,cpi,s,E,N,B,O\n2019,114.8,0.75,1,1,1,1\n");
    let out = dir.path().join("out");
    let o = decum(&["calibrate", "--history", &csv, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("HPI"), "{}", stderr(&o));
}

#[test]
fn one_year_of_history_is_insufficient() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "h.csv", "year,cpi,s,E,N,B,O,HPI\n2020,116.6,0.1,1,1,1,1,1\n");
    let out = dir.path().join("out");
    let o = decum(&["calibrate", "--history", &csv, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).to_lowercase().contains("insufficient"), "{}", stderr(&o));
}

#[test]
fn calibrate_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = decum(&["calibrate", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["esg_params.txt", "residuals.csv", "correlation.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn simulate_writes_one_row_per_path_and_year() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("panel.csv");
    let o = decum(&[
        "simulate", "--paths", "7", "--horizon", "12", "--seed", "3", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path,t,q,s,e,n,b,o,h,R,Q"));
    assert_eq!(lines.count(), 7 * 13);
}

#[test]
fn zero_iteration_training_emits_the_initial_network() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("run");
    let o = decum(&[
        "train", "--config", &cfg, "--iterations", "0", "--seed", "5", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ck = Checkpoint::load(out.join("policy.json")).unwrap();
    assert_eq!(ck.iteration, 0);
    assert_eq!(ck.params, he_init([20, 20, 20], 5).unwrap());
}

#[test]
fn train_evaluate_and_demo_path_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let run = dir.path().join("run");
    let o = decum(&["train", "--config", &cfg, "--threads", "2", "--out", run.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(run.join("checkpoints/iter_000003.json").exists());
    let report = std::fs::read_to_string(run.join("train_report.csv")).unwrap();
    assert!(report.starts_with("iter,objective,wallclock_ms"));

    let policy = run.join("policy.json");
    let eval = dir.path().join("eval");
    let o = decum(&[
        "evaluate", "--checkpoint", policy.to_str().unwrap(), "--snapshots",
        run.join("checkpoints").to_str().unwrap(), "--out", eval.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let utilities = std::fs::read_to_string(eval.join("utilities.csv")).unwrap();
    assert_eq!(utilities.lines().count(), 1 + 7 * 100);
    let curve = std::fs::read_to_string(eval.join("outperformance.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 4 * 6);
    assert!(eval.join("medians_rho5_phi0.5_w500000_male.csv").exists());
    assert!(eval.join("kde_rule_of_thumb.csv").exists());

    let demo = dir.path().join("demo.csv");
    let o = decum(&["demo-path", "--checkpoint", policy.to_str().unwrap(), "--seed", "4", "--out", demo.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&demo).unwrap();
    assert!(text.starts_with("age,q,R,consumption_real,wealth_real,pension_real"));
    assert_eq!(text.lines().count(), 43);
}

#[test]
fn missing_checkpoint_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = decum(&[
        "demo-path", "--checkpoint", dir.path().join("none.json").to_str().unwrap(), "--out",
        dir.path().join("d.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn corrupted_checkpoint_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let ck = write(dir.path(), "ck.json", "{\"format\": \"something else\"}");
    let o = decum(&["demo-path", "--checkpoint", &ck, "--out", dir.path().join("d.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
