use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pathcnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathcnn")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = pathcnn(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, trap: &str, seed: u64) {
    ok(&["synth", "--trap", trap, "--seed", &seed.to_string(), "-o", s(dir)]);
}

fn mean_distance(stats_dir: &Path) -> f64 {
    json(stats_dir.join("stats.json"))["mean_distance"].as_f64().unwrap()
}

#[test]
fn synth_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, "type2", 5);
    synth(&b, "type2", 5);
    for f in ["image.png", "mask.png", "annotation.json", "scene.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pathcnn(&["synth", "--trap", "type9", "-o", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = pathcnn(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_inputs_exit_with_input_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pathcnn(&["tubularity", "/nonexistent.png", "-o", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn plain_search_follows_an_easy_scene() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    synth(&scene, "none", 2);
    let out = tmp.path().join("plain");
    ok(&["extract", "--scene", s(&scene), "--adapter", "none", "-o", s(&out)]);
    assert!(mean_distance(&out) < 2.0);
    for f in ["path.json", "overlay.png", "fmap.pgm", "stats.json", "timing.json", "config.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn always_foreground_matches_plain_search() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    synth(&scene, "type2", 6);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["extract", "--scene", s(&scene), "--adapter", "none", "-o", s(&a)]);
    ok(&["extract", "--scene", s(&scene), "--classifier", "oracle-fg", "-o", s(&b)]);
    assert_eq!(json(a.join("path.json")), json(b.join("path.json")));
}

#[test]
fn eval_reproduces_extract_error() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    synth(&scene, "type1", 3);
    let run = tmp.path().join("run");
    ok(&["extract", "--scene", s(&scene), "--classifier", "oracle", "-o", s(&run)]);
    let report = tmp.path().join("eval");
    let stdout = ok(&[
        "eval",
        "--paths",
        &format!("oracle={}", s(&run.join("path.json"))),
        "--annotations",
        s(&scene.join("annotation.json")),
        "--fmap",
        s(&run.join("fmap.pgm")),
        "--mask",
        s(&scene.join("mask.png")),
        "-o",
        s(&report),
    ])
    .stdout;
    let r = json(report.join("report.json"));
    assert_eq!(r["rows"][0]["method"], "oracle");
    assert_eq!(r["rows"][0]["report"]["mean_distance"].as_f64().unwrap(), mean_distance(&run));
    assert!(r["dice"]["dice"].as_f64().unwrap() > 0.0);
    assert!(String::from_utf8_lossy(&stdout).contains("oracle"));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    synth(&scene, "type2", 8);
    let first = tmp.path().join("first");
    ok(&[
        "extract",
        "--scene",
        s(&scene),
        "--classifier",
        "mean-tubularity",
        "--mean-threshold",
        "0.25",
        "--penalty",
        "300",
        "-o",
        s(&first),
    ]);
    let again = tmp.path().join("again");
    ok(&[
        "--config",
        s(&first.join("config.json")),
        "extract",
        s(&scene.join("image.png")),
        "--annotations",
        s(&scene.join("annotation.json")),
        "-o",
        s(&again),
    ]);
    assert_eq!(fs::read(first.join("path.json")).unwrap(), fs::read(again.join("path.json")).unwrap());
    assert_eq!(fs::read(first.join("stats.json")).unwrap(), fs::read(again.join("stats.json")).unwrap());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"search": {"epsilon": 0.01, "lambada": 0.1}}"#).unwrap();
    let out = pathcnn(&["--config", s(&cfg), "synth", "-o", s(&tmp.path().join("x"))]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn samples_train_and_extract_with_a_model() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    synth(&scene, "type2", 12);
    let samples = tmp.path().join("samples");
    ok(&[
        "make-samples",
        s(&scene.join("annotation.json")),
        "--positives",
        "24",
        "--negatives",
        "48",
        "-o",
        s(&samples),
    ]);
    let manifest = json(samples.join("manifest.json"));
    assert_eq!(manifest["samples"].as_array().unwrap().len(), 72);
    let model = tmp.path().join("model");
    ok(&["train", s(&samples), "--epochs", "1", "-o", s(&model)]);
    assert!(json(model.join("training_log.json")).is_object());
    let run = tmp.path().join("run");
    ok(&[
        "extract",
        "--scene",
        s(&scene),
        "--model",
        s(&model.join("model.pcnn")),
        "-o",
        s(&run),
    ]);
    assert!(mean_distance(&run).is_finite());

    // a model trained on other patch sizes does not fit the default geometry
    let small = tmp.path().join("small");
    ok(&[
        "make-samples",
        s(&scene.join("annotation.json")),
        "--positives",
        "8",
        "--negatives",
        "16",
        "--patch-size",
        "21",
        "-o",
        s(&small),
    ]);
    let small_model = tmp.path().join("small_model");
    ok(&["train", s(&small), "--epochs", "1", "-o", s(&small_model)]);
    let out = pathcnn(&[
        "extract",
        "--scene",
        s(&scene),
        "--model",
        s(&small_model.join("model.pcnn")),
        "-o",
        s(&tmp.path().join("bad")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
