use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use pdmp_control_cli::commands::{run_file, Command, Overrides};
use serde_json::Value;
use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_pdmp-control"))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Writes `text` as `config.toml` in a fresh directory that also serves as
/// the output directory.
fn scratch(text: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.toml");
    fs::write(&path, text).unwrap();
    (dir, path)
}

fn run(command: Command, cfg: &Path, out: &Path) {
    run_file(command, cfg, out, &Overrides::default()).unwrap();
}

#[test]
fn missing_output_directory_exits_with_2() {
    let out = bin()
        .args(["simulate", "--config"])
        .arg(config("toy.toml"))
        .args(["--out", "/nonexistent/pdmp-output"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_with_2_and_names_the_field() {
    let text = fs::read_to_string(config("toy.toml"))
        .unwrap()
        .replace("diffusivity = 0.05", "diffusivity = -1.0");
    let (dir, path) = scratch(&text);
    let out = bin()
        .arg("value")
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("toy.diffusivity"));

    let (dir, path) = scratch(&format!("{text}\n[extra]\nknob = 1\n"));
    let out = bin()
        .arg("value")
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn track_on_the_toy_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("track")
        .arg("--config")
        .arg(config("toy.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_rerun_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let status = bin()
            .args(["simulate", "--paths", "200", "--jobs", "2", "--config"])
            .arg(config("toy.toml"))
            .arg("--out")
            .arg(dir.path())
            .status()
            .unwrap();
        assert!(status.success());
    }
    let manifest = read_json(&a.path().join("manifest.json"));
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.len() >= 6);
    for o in outputs {
        let name = o["file"].as_str().unwrap();
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(
        manifest["config_hash"],
        read_json(&b.path().join("manifest.json"))["config_hash"]
    );
}

#[test]
fn empty_horizon_gives_zero_length_paths_and_the_terminal_cost() {
    let text = fs::read_to_string(config("toy.toml"))
        .unwrap()
        .replace("time = 0.0", "time = 1.0");
    let (dir, path) = scratch(&text);
    run(Command::Simulate, &path, dir.path());
    let summary = read_json(&dir.path().join("summary.json"));
    let cost = &summary["result"]["cost"];
    // terminal cost of mode 0
    assert_eq!(cost["mean"].as_f64(), Some(0.5));
    assert_eq!(cost["stderr"].as_f64(), Some(0.0));
    assert_eq!(summary["result"]["mode_jumps"]["mean"].as_f64(), Some(0.0));
    let rows = fs::read_to_string(dir.path().join("trajectory_000.csv")).unwrap();
    let times: Vec<&str> = rows
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert!(
        times.iter().all(|t| t.parse::<f64>().unwrap() == 1.0),
        "{times:?}"
    );
}

#[test]
fn three_site_paths_respect_the_rate_bound() {
    let dir = tempfile::tempdir().unwrap();
    run_file(
        Command::Simulate,
        &config("hh3_simulate.toml"),
        dir.path(),
        &Overrides {
            paths: Some(100),
            ..Overrides::default()
        },
    )
    .unwrap();
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(
        summary["result"]["jumps_within_rate_bound"],
        Value::Bool(true)
    );
    assert_eq!(summary["manifest"], "manifest.json");
}

#[test]
fn zero_costs_give_zero_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    run(Command::Crosscheck, &config("zero_cost.toml"), dir.path());
    let report = read_json(&dir.path().join("crosscheck.json"));
    let start = &report["start_value"];
    assert_eq!(start["primal"].as_f64(), Some(0.0));
    assert!(start["bsde"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| v.as_f64() == Some(0.0)));
    assert_eq!(start["dual"]["mean"].as_f64(), Some(0.0));
    assert_eq!(report["verdict"], "PASS");
}

#[test]
fn toy_crosscheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    run(Command::Crosscheck, &config("toy.toml"), dir.path());
    let report = read_json(&dir.path().join("crosscheck.json"));
    assert_eq!(report["verdict"], "PASS", "{report:#}");
    let manifest = read_json(&dir.path().join("manifest.json"));
    let files: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["file"].as_str().unwrap())
        .collect();
    for name in [
        "value.csv",
        "bsde_n50.csv",
        "crosscheck.json",
        "summary.json",
    ] {
        assert!(files.contains(&name), "{name} missing from {files:?}");
    }
}

/// Small tracking run on the demo model with the `[hh]` keys replaced.
fn small_track(replace: &[(&str, &str)]) -> Vec<(String, f64, f64)> {
    let mut text = fs::read_to_string(config("hh_track.toml")).unwrap();
    for (from, to) in replace {
        assert!(text.contains(from), "{from}");
        text = text.replace(from, to);
    }
    text = text
        .replace("paths = 1000", "paths = 200")
        .replace("max_evaluations = 40", "max_evaluations = 8")
        .replace("series_paths = 200", "series_paths = 10");
    let (dir, path) = scratch(&text);
    run(Command::Track, &path, dir.path());
    let mut rd = csv::Reader::from_path(dir.path().join("track_costs.csv")).unwrap();
    rd.records()
        .map(|r| {
            let r = r.unwrap();
            (
                r[0].to_string(),
                r[1].parse().unwrap(),
                r[2].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn without_tracking_weight_darkness_is_optimal() {
    // The cost reduces to the light mass ∫a, so a ≡ 0 costs nothing and a ≡ 1 costs T.
    let rows = small_track(&[("kappa = 0.01", "kappa = 0.0")]);
    assert_eq!(rows[0].0, "zero");
    assert_eq!(rows[0].1, 0.0);
    assert!((rows[1].1 - 5.0).abs() < 1e-9, "{rows:?}");
    assert!(rows[2].1 >= 0.0);
}

#[test]
fn self_tracking_leaves_nothing_to_gain() {
    // In the dark the single ChR2 channel stays closed and the field stays
    // near rest, which is then also the reference.
    let rows = small_track(&[("v_ref = [20.0]", "v_ref = [0.0]")]);
    let (zero, full, opt) = (&rows[0], &rows[1], &rows[2]);
    assert!(zero.1 < 1e-3, "{rows:?}");
    assert!(full.1 > zero.1);
    assert!(opt.1 >= zero.1 - 3.0 * opt.2, "{rows:?}");
}
