mod common;

use std::path::Path;

use common::*;
use serde_json::{json, Value};

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn straight_fixture(dir: &Path) -> std::path::PathBuf {
    let scene = write_json(
        &dir.join("straight.json"),
        &series_scene(&[0.0, 0.0], 250.0, [40.0, 100.0], 0.0, 0.02),
    );
    let png = dir.join("straight-fiber.png");
    vic_ok(&["synth", s(&scene), "--out", s(&png)]);
    png
}

fn straight_config(dir: &Path, order: usize) -> std::path::PathBuf {
    write_json(
        &dir.join(format!("config_{order}.json")),
        &json!({
            "schema_version": 1,
            "basis": "legendre",
            "order": order,
            "half_width": 5.0,
            "seed": [40.0, 100.0],
            "segment_length": 20.0,
            "freeze": ["x0_1"]
        }),
    )
}

fn error_json(out: &std::process::Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("error line on stderr");
    serde_json::from_str(last).expect("stderr ends with JSON")
}

#[test]
fn straight_fiber_fits_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let png = straight_fixture(dir.path());
    let cfg = straight_config(dir.path(), 1);
    let out = dir.path().join("out");
    let stdout = vic_ok(&["fit", s(&png), "--config", s(&cfg), "--out", s(&out)]);
    let summary: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(summary["converged"], true);

    let report = read_json(&out.join("report.json"));
    assert_eq!(report["converged"], true);
    assert!(report["params"]["theta0"].as_f64().unwrap().abs() < 1e-3);
    assert!((report["params"]["x0"][1].as_f64().unwrap() - 100.0).abs() < 0.05);
    let rows = read_line_csv(&out.join("mean_line.csv"));
    assert!(rows.iter().all(|r| (r[2] - 100.0).abs() < 0.1));
    assert!(out.join("polyline.csv").exists());
    assert!(out.join("overlay.png").exists());
    assert!(!out.join("profile.csv").exists());
}

#[test]
fn missing_image_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = straight_config(dir.path(), 1);
    let out = vic(&["fit", s(&dir.path().join("nope.png")), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "IoError");
}

#[test]
fn order_fifty_legendre_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let png = straight_fixture(dir.path());
    let cfg = straight_config(dir.path(), 50);
    let out = vic(&["fit", s(&png), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(3));
    let e = error_json(&out);
    assert_eq!(e["error"], "OrderTooHigh");
    assert_eq!(e["exit_code"], 3);
}

#[test]
fn bad_flags_and_configs_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let png = straight_fixture(dir.path());
    let out = vic(&["fit", s(&png), "--order", "2"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"], "ConfigError");
    let out = vic(&["fit", s(&png), "--order", "x"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn seed_off_the_fiber_is_numeric() {
    let dir = tempfile::tempdir().unwrap();
    let png = straight_fixture(dir.path());
    let cfg = straight_config(dir.path(), 1);
    let out = vic(&["fit", s(&png), "--config", s(&cfg), "--seed", "40,30", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_json(&out)["error"], "SeedError");
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let png = straight_fixture(dir.path());
    let cfg = straight_config(dir.path(), 1);
    let out = dir.path().join("out");
    vic_ok(&[
        "fit", s(&png), "--config", s(&cfg), "--out", s(&out), "--order", "2", "--detect-end",
        "--no-backtracking",
    ]);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["order"], 2);
    assert_eq!(report["params"]["a"].as_array().unwrap().len(), 3);
    assert!(out.join("profile.csv").exists());
    let end = &report["end_detection"];
    assert_eq!(end["kind"], "end");
    assert!((end["s"].as_f64().unwrap() - 250.0).abs() < 6.0, "{end}");
}

#[test]
fn oracle_starts_exactly_horizontal() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_json(&dir.path().join("spec.json"), &cantilever_spec());
    let csv = dir.path().join("shape.csv");
    vic_ok(&["oracle", s(&spec), "--out", s(&csv)]);
    let rows = read_line_csv(&csv);
    assert_eq!(rows.len(), 2000);
    assert_eq!(rows[0], [0.0, 0.0, 0.0, 0.0, rows[0][4]]);
    assert_eq!(rows.last().unwrap()[4], 0.0);

    let px = dir.path().join("px.csv");
    vic_ok(&["oracle", s(&spec), "--out", s(&px), "--px-per-meter", "100", "--origin", "5,6"]);
    let rows = read_line_csv(&px);
    assert_eq!((rows[0][1], rows[0][2]), (5.0, 6.0));
}

#[test]
fn unwrap_of_a_converged_fit_is_nearly_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_json(
        &dir.path().join("curved.json"),
        &series_scene(&[0.001, 0.0005], 250.0, [40.0, 60.0], 0.1, 0.0),
    );
    let png = dir.path().join("curved.png");
    vic_ok(&["synth", s(&scene), "--out", s(&png)]);
    let out = dir.path().join("out");
    vic_ok(&[
        "fit", s(&png), "--out", s(&out), "--order", "1", "--half-width", "5", "--seed", "40,60",
        "--seed-angle", "5.7", "--segment-length", "20", "--freeze", "x0_1",
    ]);
    let strip = dir.path().join("strip.png");
    let report = out.join("report.json");
    let stdout = vic_ok(&["unwrap", s(&png), s(&report), "--out", s(&strip), "--max-asymmetry", "0.01"]);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert!(v["asymmetry"].as_f64().unwrap() < 0.01);
    assert!(strip.exists());

    let tight = vic(&["unwrap", s(&png), s(&report), "--out", s(&strip), "--max-asymmetry", "1e-9"]);
    assert_eq!(tight.status.code(), Some(4));
    assert_eq!(error_json(&tight)["error"], "AsymmetryBound");
}

#[test]
fn sweep_is_non_increasing_on_a_curved_fiber() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_json(
        &dir.path().join("curved.json"),
        &series_scene(&[0.001, 0.0005, -0.0003], 250.0, [40.0, 60.0], 0.1, 0.05),
    );
    let png = dir.path().join("curved.png");
    vic_ok(&["synth", s(&scene), "--out", s(&png)]);
    let csv = dir.path().join("sweep.csv");
    vic_ok(&[
        "sweep-order", s(&png), "--min", "1", "--max", "8", "--out", s(&csv), "--half-width", "5",
        "--seed", "40,60", "--seed-angle", "5.7", "--segment-length", "20", "--freeze", "x0_1",
    ]);
    let mut r = csv::Reader::from_path(&csv).unwrap();
    let rows: Vec<vic_cli::commands::SweepRow> = r.deserialize().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.status == "ok"));
    assert!(rows.windows(2).all(|w| w[1].phi_final <= w[0].phi_final));
    assert_eq!(rows.iter().map(|r| r.order).collect::<Vec<_>>(), (1..=8).collect::<Vec<_>>());
}

#[test]
fn fit_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let png = straight_fixture(dir.path());
    let cfg = straight_config(dir.path(), 2);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        vic_ok(&["fit", s(&png), "--config", s(&cfg), "--out", s(out), "--detect-end"]);
    }
    for f in ["report.json", "mean_line.csv", "polyline.csv", "profile.csv", "overlay.png"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}
