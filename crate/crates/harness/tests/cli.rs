//! End-to-end checks of the `ocvp` binary on a tiny configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

const TINY: &[&str] = &[
    "data.n_clips=12",
    "data.test_clips=4",
    "oaae.embed_dim=4",
    "oaae.codebook_size=16",
    "oaae.hidden_dims=8,8",
    "oaae.n_residual_layers=1",
    "oaae_optim.steps=3",
    "oaae_optim.batch_size=2",
    "predictor.model_dim=8",
    "predictor.n_heads=2",
    "predictor.depth=1",
    "predictor_optim.steps=3",
    "eval.temperatures=0.5,1",
    "eval.n_subsets=2",
];

fn ocvp(out: &Path, args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ocvp"));
    cmd.arg("--out").arg(out).arg("--quiet");
    for s in TINY {
        cmd.args(["--set", s]);
    }
    cmd.args(args);
    cmd
}

fn run_ok(out: &Path, args: &[&str]) -> String {
    let o = ocvp(out, args).output().unwrap();
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn run_err(out: &Path, args: &[&str]) -> Output {
    let o = ocvp(out, args).output().unwrap();
    assert!(!o.status.success(), "{args:?} unexpectedly succeeded");
    o
}

fn line_value<'a>(stdout: &'a str, key: &str) -> &'a str {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).map(str::trim))
        .unwrap_or_else(|| panic!("no `{key}` line in:\n{stdout}"))
}

#[test]
fn every_command_prints_the_config_first() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(dir.path(), &["params"]);
    let mut lines = out.lines();
    let head = lines.next().unwrap();
    assert!(head.starts_with("# config ") && head.len() == "# config ".len() + 64, "{head}");
    assert!(out.contains("oaae.embed_dim = 4"));
    assert!(out.contains("# end config"));
    assert!(out.contains("predictor-sis,24,"), "{out}");
}

#[test]
fn generate_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let da = run_ok(a.path(), &["generate", "--preset", "bounce2", "--seed", "0"]);
    let db = run_ok(b.path(), &["generate", "--preset", "bounce2", "--seed", "0"]);
    let dc = run_ok(c.path(), &["generate", "--preset", "bounce2", "--seed", "1"]);
    assert_eq!(line_value(&da, "dataset_digest"), line_value(&db, "dataset_digest"));
    assert_ne!(line_value(&da, "dataset_digest"), line_value(&dc, "dataset_digest"));
    // Regenerating in place is a no-op that reports the same digest.
    let again = run_ok(a.path(), &["generate", "--preset", "bounce2", "--seed", "0"]);
    assert_eq!(line_value(&da, "dataset_digest"), line_value(&again, "dataset_digest"));
}

#[test]
fn training_without_a_dataset_names_the_missing_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_err(dir.path(), &["train-oaae"]);
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains(&dir.path().join("data").display().to_string()), "{err}");
}

#[test]
fn configuration_errors_are_reported_together() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_err(dir.path(), &["--set", "nope.key=1", "--set", "other=2", "generate"]);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("nope.key") && err.contains("other"), "{err}");
    let o = run_err(dir.path(), &["--set", "oaae.embed_dim=0", "--set", "predictor.dropout=2", "generate"]);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("embed_dim") && err.contains("dropout"), "{err}");
    assert!(!dir.path().join("data").exists());
}

#[test]
fn argmax_predictions_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["generate"]);
    run_ok(d, &["train-oaae"]);
    run_ok(d, &["train-predictor", "--variant", "scat"]);
    let read = |stdout: &str| -> Vec<(PathBuf, Vec<u8>)> {
        stdout
            .lines()
            .filter(|l| l.ends_with(".ocv"))
            .map(|l| (PathBuf::from(l), fs::read(l).unwrap()))
            .collect()
    };
    let first = read(&run_ok(d, &["predict", "--variant", "scat", "--argmax", "--clips", "8,9"]));
    assert_eq!(first.len(), 2);
    let second = read(&run_ok(d, &["predict", "--variant", "scat", "--argmax", "--clips", "8,9", "--sample-seed", "7"]));
    assert_eq!(first, second);
    let clip = ocvp::synthdata::Clip::read(&first[0].0).unwrap();
    assert_eq!(clip.len(), 10);
}

fn ledger_text(dir: &Path) -> String {
    fs::read_to_string(dir.join("ledger.json")).unwrap_or_default()
}

#[test]
fn stopping_and_resuming_reproduces_the_report() {
    let straight = tempfile::tempdir().unwrap();
    let resumed = tempfile::tempdir().unwrap();
    let full = run_ok(straight.path(), &["compare", "--sequential"]);
    assert!(full.starts_with("# config "));
    let first = run_ok(resumed.path(), &["compare", "--sequential", "--stop-after", "predictor-sncat"]);
    assert!(first.contains("stopped after predictor-sncat"), "{first}");
    assert!(!resumed.path().join("report.csv").exists());
    run_ok(resumed.path(), &["compare", "--sequential"]);
    let ledger = ledger_text(resumed.path());
    // Completed stages were not started a second time.
    assert_eq!(ledger.matches("\"stage\": \"oaae\"").count(), 2, "{ledger}");
    assert_eq!(ledger.matches("\"stage\": \"predictor-sncat\"").count(), 2);
    let a = fs::read(straight.path().join("report.csv")).unwrap();
    let b = fs::read(resumed.path().join("report.csv")).unwrap();
    assert_eq!(a, b);
    let table = String::from_utf8(a).unwrap();
    for v in ["sis", "sncat", "scat"] {
        assert!(table.lines().any(|l| l.starts_with(&format!("full,{v},"))), "{table}");
    }
}

#[test]
fn killed_run_resumes_to_the_same_report() {
    let straight = tempfile::tempdir().unwrap();
    let killed = tempfile::tempdir().unwrap();
    run_ok(straight.path(), &["compare", "--sequential", "--seed", "3"]);
    let mut child = ocvp(killed.path(), &["compare", "--sequential", "--seed", "3"])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    // Kill mid-stage: once generation is complete and the autoencoder has started.
    let deadline = Instant::now() + Duration::from_secs(600);
    while !ledger_text(killed.path()).contains("\"completed\"") || !ledger_text(killed.path()).contains("\"oaae\"") {
        if child.try_wait().unwrap().is_some() || Instant::now() > deadline {
            break;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    let _ = child.kill();
    child.wait().unwrap();
    run_ok(killed.path(), &["compare", "--sequential", "--seed", "3"]);
    assert_eq!(
        fs::read(straight.path().join("report.csv")).unwrap(),
        fs::read(killed.path().join("report.csv")).unwrap()
    );
}
