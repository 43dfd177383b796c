use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_agrisynth");

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A Synthetic-D config shrunk to 96x72 so tests stay fast.
fn small_config(dir: &Path) {
    let o = run(&["init", "--preset", "synthetic-d", "--out", "cfg.toml", "--seed", "7"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.join("cfg.toml")).unwrap();
    let text = text.replacen("width = 480", "width = 96", 1).replacen("height = 360", "height = 72", 1);
    assert!(text.contains("width = 96") && text.contains("height = 72"));
    std::fs::write(dir.join("cfg.toml"), text).unwrap();
}

#[test]
fn init_writes_loadable_presets() {
    let dir = tempfile::tempdir().unwrap();
    for preset in ["synthetic-a", "synthetic-b", "synthetic-c", "synthetic-d"] {
        let file = format!("{preset}.toml");
        let o = run(&["init", "--preset", preset, "--out", &file], dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let cfg = agrisynth::config::load_config(&dir.path().join(&file)).unwrap();
        cfg.validate().unwrap();
    }
    let o = run(&["init", "--preset", "synthetic-z", "--out", "z.toml"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["generate", "--config", "missing.toml", "--out", "out"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing.toml"), "{}", stderr(&o));

    small_config(dir.path());
    let o = run(&["preview", "--config", "cfg.toml", "--index", "-1", "--out", "x"], dir.path());
    assert_eq!(code(&o), 2);
    let o = run(&["frobnicate"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn generate_then_preview_matches() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let o = run(&["generate", "--config", "cfg.toml", "--out", "data", "--count", "2", "--jobs", "1"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut names: Vec<String> = std::fs::read_dir(dir.path().join("data"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["img_00000_label.png", "img_00000_rgb.png", "img_00001_label.png", "img_00001_rgb.png", "manifest.json"]
    );

    let o = run(&["preview", "--config", "cfg.toml", "--index", "1", "--out", "x"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for (preview, generated) in [("x_rgb.png", "img_00001_rgb.png"), ("x_label.png", "img_00001_label.png")] {
        assert_eq!(
            std::fs::read(dir.path().join(preview)).unwrap(),
            std::fs::read(dir.path().join("data").join(generated)).unwrap()
        );
    }
}

#[test]
fn evaluate_reports_and_names_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let o = run(&["generate", "--config", "cfg.toml", "--out", "gt", "--count", "2", "--jobs", "1"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = run(&["evaluate", "--pred", "gt", "--gt", "gt", "--palette", "gt/manifest.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("gt/metrics.json")).unwrap()).unwrap();
    assert_eq!(report["global_accuracy"], 100.0);
    assert_eq!(report["mean_iou"], 100.0);

    let o = run(
        &["evaluate", "--pred", "gt", "--gt", "gt", "--palette", "cfg.toml", "--merge-vegetation", "--report", "v.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(report["classes"].as_array().unwrap().len(), 2);

    std::fs::create_dir(dir.path().join("pred")).unwrap();
    std::fs::copy(dir.path().join("gt/img_00000_label.png"), dir.path().join("pred/img_00000_label.png")).unwrap();
    let o = run(&["evaluate", "--pred", "pred", "--gt", "gt", "--palette", "gt/manifest.json"], dir.path());
    assert_ne!(code(&o), 0);
    assert!(stderr(&o).contains("img_00001_label.png"), "{}", stderr(&o));
}

#[test]
fn baseline_train_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path());
    let o = run(&["generate", "--config", "cfg.toml", "--out", "data", "--count", "3", "--jobs", "1"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["baseline", "train", "--data", "data", "--model", "model.json", "--sample-rate", "0.5"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    assert_eq!(model["format"], "agrisynth-centroid");

    let o = run(&["baseline", "predict", "--model", "model.json", "--in", "data", "--out", "pred"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for i in 0..3 {
        assert!(dir.path().join(format!("pred/img_{i:05}_label.png")).is_file());
    }
    let o = run(&["evaluate", "--pred", "pred", "--gt", "data", "--palette", "data/manifest.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}
