use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use rul_core::artifacts::{self, load_bundle, parse_predictions_csv, sha256_hex, Checkpoint};
use rul_core::dataset::{parse_rul_file, parse_trajectory_file};
use rul_core::models::{LookupTable, Model};
use rul_core::synthetic;

fn rul(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rul"))
        .args(args)
        .env_remove("CMAPSS_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = rul(args);
    assert!(
        out.status.success(),
        "rul {args:?} failed:\n{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn hash(p: &Path) -> String {
    sha256_hex(&std::fs::read(p).unwrap())
}

/// Writes a small fleet and returns (data dir, run dir) inside `root`.
fn setup(root: &Path, engines: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = root.join("data");
    synthetic::generate(engines, 9).write_to(&data).unwrap();
    (data, root.join("run"))
}

const SMALL: [&str; 6] = ["--epochs", "2", "--batch-size", "32", "--seed", "5"];

fn small_config(root: &Path, data: &Path, out: &Path) -> std::path::PathBuf {
    let cfg = root.join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "out = {:?}\n[data]\ndir = {:?}\n[training]\nn_val = 4\nlstm_hidden = 8\nmlp_hidden = [8]\n",
            s(out),
            s(data)
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn full_cycle_is_deterministic_and_self_consistent() {
    let root = tempfile::tempdir().unwrap();
    let (data, out) = setup(root.path(), 20);
    let cfg = small_config(root.path(), &data, &out);
    let c = s(&cfg);

    let stdout = ok(&["preprocess", "--config", c, "--seed", "5"]);
    let expected: usize = parse_trajectory_file(&std::fs::read_to_string(data.join("train_FD001.txt")).unwrap())
        .unwrap()
        .iter()
        .map(|t| t.len() - 29)
        .sum();
    assert!(stdout.contains(&format!("training samples: {expected}")), "{stdout}");

    let mut args = vec!["train", "--config", c, "--model", "lstm"];
    args.extend(SMALL);
    ok(&args);
    ok(&["evaluate", "--config", c, "--seed", "5"]);

    let names = [
        artifacts::BUNDLE_FILE,
        artifacts::SCALER_FILE,
        artifacts::SPLIT_FILE,
        artifacts::CHECKPOINT_FILE,
        artifacts::HISTORY_FILE,
        artifacts::REPORT_FILE,
        artifacts::PREDICTIONS_FILE,
    ];
    let first: Vec<String> = names.iter().map(|n| hash(&out.join(n))).collect();

    ok(&["preprocess", "--config", c, "--seed", "5"]);
    let mut args = vec!["train", "--config", c, "--model", "lstm", "--sequential"];
    args.extend(SMALL);
    ok(&args);
    ok(&["evaluate", "--config", c, "--seed", "5"]);
    let second: Vec<String> = names.iter().map(|n| hash(&out.join(n))).collect();
    assert_eq!(first, second);

    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().next(), Some("epoch,train_mse,val_mse"));
    assert_eq!(history.lines().count(), 3);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eval_report.json")).unwrap()).unwrap();
    let rows = parse_predictions_csv(&std::fs::read_to_string(out.join("predictions.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 20);
    let mse = rows.iter().map(|r| (r.predicted_rul - r.true_rul).powi(2)).sum::<f64>() / rows.len() as f64;
    assert!((mse - report["mse"].as_f64().unwrap()).abs() <= 1e-9);
    assert_eq!(report["checkpoint_hash"], hash(&out.join("checkpoint.json")));

    let input = data.join("test_FD001.txt");
    let pred = ok(&["predict", "--config", c, "--seed", "5", "--input", s(&input)]);
    assert_eq!(pred.lines().count(), 21);
    assert!(pred.starts_with("engine_id,last_cycle,predicted_rul"));
}

#[test]
fn mlp_history_has_default_epoch_count_and_hundred_predictions() {
    let root = tempfile::tempdir().unwrap();
    let (data, out) = setup(root.path(), 100);
    let d = s(&data);
    let o = s(&out);
    ok(&["preprocess", "--data-dir", d, "--out", o]);
    ok(&["train", "--data-dir", d, "--out", o, "--model", "mlp"]);
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 36);
    let stdout = ok(&["evaluate", "--data-dir", d, "--out", o]);
    assert!(stdout.contains("test MSE: "), "{stdout}");
    let preds = std::fs::read_to_string(out.join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 101);
    let timings = std::fs::read_to_string(out.join("timings.csv")).unwrap();
    assert_eq!(timings.lines().next(), Some("epoch,seconds"));
}

#[test]
fn oracle_checkpoint_scores_zero() {
    let root = tempfile::tempdir().unwrap();
    let (data, out) = setup(root.path(), 12);
    let cfg = small_config(root.path(), &data, &out);
    let c = s(&cfg);
    ok(&["preprocess", "--config", c]);

    let (header, _) = load_bundle(
        &std::fs::read_to_string(out.join(artifacts::BUNDLE_FILE)).unwrap(),
        &std::fs::read_to_string(out.join(artifacts::SCALER_FILE)).unwrap(),
    )
    .unwrap();
    let test = parse_trajectory_file(&std::fs::read_to_string(data.join("test_FD001.txt")).unwrap()).unwrap();
    let labels = parse_rul_file(&std::fs::read_to_string(data.join("RUL_FD001.txt")).unwrap()).unwrap();
    let table: BTreeMap<u32, f64> = test
        .iter()
        .zip(&labels.ruls)
        .map(|(t, &r)| (t.engine_id, f64::from(r)))
        .collect();
    let ckpt = Checkpoint::new(Model::Lookup(LookupTable { predictions: table }), None, None, &header).unwrap();
    let path = root.path().join("oracle.json");
    std::fs::write(&path, ckpt.to_json().unwrap()).unwrap();

    let stdout = ok(&["evaluate", "--config", c, "--checkpoint", s(&path)]);
    assert!(stdout.contains("test MSE: 0\n"), "{stdout}");
}

#[test]
fn stale_scaler_is_refused() {
    let root = tempfile::tempdir().unwrap();
    let (data, out) = setup(root.path(), 12);
    let cfg = small_config(root.path(), &data, &out);
    let c = s(&cfg);
    ok(&["preprocess", "--config", c]);
    ok(&["train", "--config", c, "--model", "mlp", "--epochs", "1", "--batch-size", "16"]);
    ok(&["preprocess", "--config", c, "--alpha", "0.3"]);
    let out = rul(&["evaluate", "--config", c, "--alpha", "0.3"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("scaler"), "{err}");
}

#[test]
fn training_against_mismatched_bundle_fails() {
    let root = tempfile::tempdir().unwrap();
    let (data, out) = setup(root.path(), 10);
    let cfg = small_config(root.path(), &data, &out);
    let c = s(&cfg);
    ok(&["preprocess", "--config", c]);
    let r = rul(&["train", "--config", c, "--window", "15", "--epochs", "1"]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("re-run preprocess"));
}

#[test]
fn bad_path_fails_without_artifacts() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("run");
    let missing = root.path().join("nowhere");
    let r = rul(&["preprocess", "--data-dir", s(&missing), "--out", s(&out)]);
    assert!(!r.status.success());
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("nowhere"), "{err}");
    assert!(!out.exists());
}

#[test]
fn corrupt_input_fails_without_artifacts() {
    let root = tempfile::tempdir().unwrap();
    let (data, out) = setup(root.path(), 5);
    let train = data.join("train_FD001.txt");
    let mut text = std::fs::read_to_string(&train).unwrap();
    text.push_str("6 1 0.0 oops\n");
    std::fs::write(&train, text).unwrap();
    let r = rul(&["preprocess", "--data-dir", s(&data), "--out", s(&out)]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("train_FD001.txt"));
    assert!(!out.exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("bad.toml");
    std::fs::write(&cfg, "[training]\nepochz = 3\n").unwrap();
    for cmd in ["preprocess", "train", "verify"] {
        let r = rul(&[cmd, "--config", s(&cfg)]);
        assert!(!r.status.success(), "{cmd}");
        assert!(String::from_utf8_lossy(&r.stderr).contains("unknown field"), "{cmd}");
    }
}

#[test]
fn invalid_flag_values_exit_nonzero() {
    assert!(!rul(&["preprocess", "--model", "gru"]).status.success());
    assert!(!rul(&["preprocess", "--alpha", "0"]).status.success());
    assert!(!rul(&["frobnicate"]).status.success());
}

#[test]
fn verify_passes_clean_and_fails_with_fault() {
    let stdout = ok(&["verify", "--trials", "20"]);
    assert!(stdout.contains("all checks passed"), "{stdout}");
    assert!(stdout.contains("max gradient rel error"));

    let r = rul(&["verify", "--trials", "3", "--inject-fault", "0.5"]);
    assert!(!r.status.success());
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(!stdout.contains("all checks passed"));
    assert!(String::from_utf8_lossy(&r.stderr).contains("gradcheck"));
}
