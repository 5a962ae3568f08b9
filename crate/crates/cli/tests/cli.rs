//! End-to-end runs of the `dkgad` binary: the stage chain on a small
//! scenario, and the exit codes of the documented failure modes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
[scenario]
seed = 4
duration = 1800
target_rate = 0.06
";

fn dkgad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dkgad"))
        .args(args)
        .env_remove("DKGAD_DATA")
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dkgad(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails_with(args: &[&str], code: i32) -> String {
    let out = dkgad(args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(out.status.code(), Some(code), "{args:?}: {stderr}");
    stderr
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stage_chain_from_generate_to_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let data = dir.path().join("data");
    let (cfg, d) = (s(&cfg), s(&data));

    ok(&["generate", "--config", cfg, "--out", d]);
    assert!(data.join("labels.csv").exists());
    ok(&["ingest", "--in", d]);
    assert!(data.join("graph.dkgc").exists());
    for level in ["d2", "d3"] {
        ok(&["featurize", "--in", d, "--level", level, "--config", cfg]);
    }
    let header = fs::read_to_string(data.join("features_d2.csv")).unwrap();
    assert!(header.starts_with("entity,t,"), "{}", &header[..40]);

    for (model, level) in [("xgb", "d2"), ("svm", "d2"), ("sa", "d3")] {
        ok(&["train", "--in", d, "--level", level, "--model", model, "--config", cfg]);
        ok(&["predict", "--in", d, "--model", model, "--level", level]);
        assert!(data.join(format!("predictions/{model}_{level}.csv")).exists());
    }
    assert!(data.join("models/sa_d3.loss.csv").exists());

    fs::write(
        data.join("ensemble.toml"),
        "mode = \"soft\"\nthreshold = 0.5\nmembers = [\"models/xgb_d2.json\", \"models/svm_d2.json\", \"models/sa_d3.json\"]\n",
    )
    .unwrap();
    let ens = data.join("predictions/ensemble.csv");
    ok(&["ensemble", "--in", d, "--ensemble", s(&data.join("ensemble.toml")), "--out", s(&ens)]);
    let rows = fs::read_to_string(&ens).unwrap();
    let single = fs::read_to_string(data.join("predictions/xgb_d2.csv")).unwrap();
    assert_eq!(rows.lines().count(), single.lines().count(), "ensemble rows follow the D2 members");

    let metrics = data.join("metrics.kv");
    let printed = ok(&["evaluate", "--in", s(&ens), "--labels", s(&data.join("labels.csv")), "--out", s(&metrics)]);
    assert!(printed.contains("F1"), "{printed}");
    let kv = fs::read_to_string(&metrics).unwrap();
    let f1: f64 = kv
        .lines()
        .find_map(|l| l.strip_prefix("f1="))
        .expect("f1 line")
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&f1));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(data.join("dkgad-manifest.json")).unwrap()).unwrap();
    let commands: Vec<&str> = manifest["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["command"].as_str().unwrap())
        .collect();
    for c in ["generate", "ingest", "featurize", "train", "predict", "ensemble", "evaluate"] {
        assert!(commands.contains(&c), "{c} missing from {commands:?}");
    }
}

#[test]
fn train_and_predict_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let data = dir.path().join(run);
        let d = s(&data);
        ok(&["generate", "--config", s(&cfg), "--out", d]);
        ok(&["ingest", "--in", d]);
        ok(&["featurize", "--in", d, "--level", "d1", "--config", s(&cfg)]);
        ok(&["train", "--in", d, "--level", "d1", "--model", "mlp", "--config", s(&cfg), "--seed", "3"]);
        ok(&["predict", "--in", d, "--model", "mlp", "--level", "d1"]);
        outputs.push(fs::read(data.join("predictions/mlp_d1.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn evaluate_length_mismatch_exits_6_and_names_both_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.csv");
    fs::write(&pred, "entity,t,score,label\nsvc0,0,0.9,1\nsvc0,15,0.1,0\nsvc0,30,0.2,0\n").unwrap();
    let labels = dir.path().join("rows.csv");
    fs::write(&labels, "entity,t,label\nsvc0,0,1\nsvc0,15,0\n").unwrap();
    let err = fails_with(&["evaluate", "--in", s(&pred), "--labels", s(&labels)], 6);
    assert!(err.starts_with("error: code=6 kind=mismatch"), "{err}");
    assert!(err.contains('3') && err.contains('2'), "{err}");
}

#[test]
fn missing_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let nowhere = dir.path().join("nowhere");
    let err = fails_with(&["ingest", "--in", s(&nowhere)], 3);
    assert!(err.contains("kind=missing_input"), "{err}");
    fails_with(&["featurize", "--in", s(dir.path()), "--level", "d1"], 3);
    fails_with(&["train", "--in", s(dir.path()), "--level", "d2", "--model", "xgb"], 3);
    fails_with(&["generate", "--config", s(&nowhere.join("cfg.toml")), "--out", s(dir.path())], 3);
}

#[test]
fn schema_violations_exit_4_unless_lenient() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("snapshot_0.ttl"),
        "@prefix k: <http://example.org/k8s#> .\nk:svc0 a k:Service ; k:requestRate \"fast\" .\n",
    )
    .unwrap();
    let err = fails_with(&["ingest", "--in", s(dir.path())], 4);
    assert!(err.contains("kind=schema"), "{err}");
    ok(&["ingest", "--in", s(dir.path()), "--lenient"]);

    fs::write(dir.path().join("snapshot_15.ttl"), "k:svc0 a k:Service .\n").unwrap();
    fails_with(&["ingest", "--in", s(dir.path()), "--lenient"], 4);
}

#[test]
fn bad_arguments_exit_2() {
    fails_with(&["featurize", "--level", "d9"], 2);
    fails_with(&["frobnicate"], 2);
}
