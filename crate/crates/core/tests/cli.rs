mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn defake(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_defake")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FAST: [&str; 8] = ["--epochs", "2", "--dim", "8", "--roots", "100", "--presample-rounds", "200"];

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&defake(&["--help"])), 0);
    assert_eq!(code(&defake(&["frobnicate"])), 1);
    assert_eq!(code(&defake(&["train"])), 1);
    let out = defake(&["experiment", "--data", "x", "--variants", "bogus"]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_or_corrupt_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = defake(&["presample", "--data", path(&dir.path().join("absent"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));

    let data = common::fixture_copy("tiny");
    fs::write(data.path().join("news_edges.tsv"), "0\t4\n1\tx\n").unwrap();
    let out = defake(&["presample", "--data", path(data.path())]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("news_edges.tsv:2"));
}

#[test]
fn bad_configuration_exits_1() {
    let data = common::fixture_copy("tiny");
    let out = defake(&["presample", "--data", path(data.path()), "--roots", "0"]);
    assert_eq!(code(&out), 1);
    let out = defake(&[
        "experiment",
        "--data",
        path(data.path()),
        "--train-frac",
        "0.9",
        "--val-frac",
        "0.3",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn gradcheck_passes_and_flags_an_impossible_tolerance() {
    let out = defake(&["gradcheck"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["max_rel_error"].as_f64().unwrap() < 1e-5);
    assert_eq!(code(&defake(&["gradcheck", "--tolerance", "0"])), 3);
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = defake(&["synth", "--out", path(d), "--sources", "40", "--users", "30", "--seed", "2"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in [
        "news_edges.tsv",
        "user_edges.tsv",
        "inter_edges.tsv",
        "news_attrs.tsv",
        "user_attrs.tsv",
        "manifest.json",
        "meta.json",
    ] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["n_source_news"], 40);
}

#[test]
fn train_then_eval() {
    let data = common::fixture_copy("politifact_shaped");
    let run = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--data", path(data.path()), "--out", path(run.path()), "--seed", "1"];
    args.extend(FAST);
    let out = defake(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["split.json", "train.jsonl", "last.ckpt", "best.ckpt"] {
        assert!(run.path().join(name).exists(), "{name}");
    }
    let log = fs::read_to_string(run.path().join("train.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for key in ["epoch", "minibatch", "L_t", "L_u", "L", "wall_ms"] {
        assert!(first.get(key).is_some(), "{key}");
    }

    let ckpt = run.path().join("best.ckpt");
    let out = defake(&["eval", "--data", path(data.path()), "--checkpoint", path(&ckpt)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let metrics: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let acc = metrics["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    fs::write(run.path().join("broken.ckpt"), b"not a checkpoint").unwrap();
    let out = defake(&[
        "eval",
        "--data",
        path(data.path()),
        "--checkpoint",
        path(&run.path().join("broken.ckpt")),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn experiment_prints_a_table_and_writes_reports() {
    let data = common::fixture_copy("politifact_shaped");
    let report = data.path().join("report.json");
    let mut args = vec![
        "experiment",
        "--data",
        path(data.path()),
        "--folds",
        "2",
        "--variants",
        "defake,us-defake",
        "--out",
        path(&report),
    ];
    args.extend(FAST);
    let out = defake(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().next().unwrap().starts_with("Method"));
    assert!(table.contains("us-defake") && table.contains('±'));
    let reports: serde_json::Value = serde_json::from_slice(&fs::read(report).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 2);
    assert_eq!(reports[0]["folds"].as_array().unwrap().len(), 2);
}
