use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shmotion::config::ExperimentConfig;
use shmotion::presets::PRESETS;

const TINY: &str = r#"
schema_version = 1
name = "tiny"
seed = 7
trials = 2

[array]
layout = "near_uniform"
count = 24
radius = 0.06

[motion]
mode = "rotate_z"
angular_velocity = [0.0, 60.0]

[source]
kind = "wideband"
directions_deg = [[90.0, 40.0]]

[noise]
snr = 20.0
band = "wideband"

[estimator]
method = ["none", "compensated"]
order = 3
frames = 20
freq_range = [1800.0, 2700.0]
grid_resolution = 4.0
"#;

fn shmotion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shmotion"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_accepts_every_preset() {
    for (name, _) in PRESETS {
        let out = shmotion(&["validate", &format!("preset:{name}")]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn invalid_config_exits_2_with_field_paths() {
    let dir = tempfile::tempdir().unwrap();
    let bad = TINY
        .replace("count = 24", "count = 7")
        .replace("order = 3", "order = 3\nsources = 16");
    let cfg = write(dir.path(), "bad.toml", &bad);
    let out = shmotion(&["validate", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("array.count"), "{err}");
    assert!(err.contains("estimator.sources"), "{err}");

    let out = shmotion(&["run", "preset:nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_field_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "typo.toml", &TINY.replace("seed = 7", "sede = 7"));
    assert_eq!(shmotion(&["validate", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", TINY);
    let missing = dir.path().join("missing.wav");
    let out = shmotion(&["estimate", s(&cfg), "--audio", s(&missing)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_is_reproducible_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", TINY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, jobs) in [(&a, "1"), (&b, "2")] {
        let r = shmotion(&["run", s(&cfg), "--out", s(out), "--jobs", jobs]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    for f in ["summary.json", "trials.csv", "resolved_config.toml", "spectra/condition_0.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let info: serde_json::Value = serde_json::from_slice(&fs::read(a.join("run_info.json")).unwrap()).unwrap();
    assert!(info["timestamp"].is_string());
    assert_eq!(info["jobs"], 1);

    let summary: serde_json::Value = serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["seed"], 7);
    let conds = summary["conditions"].as_array().unwrap();
    assert_eq!(conds.len(), 4);
    for c in conds {
        assert_eq!(c["completed"], 2);
    }
    let rows = fs::read_to_string(a.join("trials.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4 * 2);

    let other = dir.path().join("c");
    let r = shmotion(&["run", s(&cfg), "--out", s(&other), "--seed", "8"]);
    assert!(r.status.success());
    assert_ne!(fs::read(a.join("trials.csv")).unwrap(), fs::read(other.join("trials.csv")).unwrap());
}

#[test]
fn resolved_config_reruns_to_the_same_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.toml", TINY);
    let first = dir.path().join("first");
    assert!(shmotion(&["run", s(&cfg), "--out", s(&first)]).status.success());
    let resolved = first.join("resolved_config.toml");
    let again = dir.path().join("again");
    let r = shmotion(&["run", s(&resolved), "--out", s(&again)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(fs::read(first.join("summary.json")).unwrap(), fs::read(again.join("summary.json")).unwrap());
}

#[test]
fn synth_then_estimate_recovers_the_source() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY
        .replace("angular_velocity = [0.0, 60.0]", "angular_velocity = 60.0")
        .replace("method = [\"none\", \"compensated\"]", "method = \"compensated\"");
    let cfg = write(dir.path(), "one.toml", &text);
    let synth = dir.path().join("synth");
    let r = shmotion(&["synth", s(&cfg), "--out", s(&synth)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(synth.join("synth.json")).unwrap()).unwrap();
    let entry = &manifest[0];
    let wav = synth.join(entry["file"].as_str().unwrap());
    let traj = synth.join(entry["trajectory"].as_str().unwrap());

    let est = dir.path().join("est");
    let r = shmotion(&["estimate", s(&cfg), "--audio", s(&wav), "--trajectory", s(&traj), "--out", s(&est)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let res: serde_json::Value = serde_json::from_slice(&fs::read(est.join("estimate.json")).unwrap()).unwrap();
    let got = &res["results"][0]["estimates_deg"][0];
    let (t, p) = (got[0].as_f64().unwrap(), got[1].as_f64().unwrap());
    assert!((t - 90.0).abs() <= 8.0 && (p - 40.0).abs() <= 8.0, "estimate {t}, {p}");
}

#[test]
fn erank_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("er");
    let r = shmotion(&["erank", "preset:fig_c1a", "--out", s(&out)]);
    assert!(r.status.success());
    let csv = fs::read_to_string(out.join("erank.csv")).unwrap();
    assert!(csv.starts_with("motion,frequency_hz,rotation_deg"));
    assert_eq!(csv.lines().count(), 1 + 46);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(out.join("erank.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
}

#[test]
fn exported_presets_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    assert!(shmotion(&["presets", "--export", s(dir.path())]).status.success());
    for (name, _) in PRESETS {
        let cfg = ExperimentConfig::load(&dir.path().join(format!("{name}.toml"))).unwrap();
        assert_eq!(cfg.name, name);
    }
}
