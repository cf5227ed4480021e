//! Fixtures and curve metrics shared by the CLI test targets.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub type P = [f64; 2];

pub fn vic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vic"))
        .args(args)
        .output()
        .expect("vic binary runs")
}

pub fn vic_ok(args: &[&str]) -> String {
    let out = vic(args);
    assert!(
        out.status.success(),
        "vic {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn write_json(path: &Path, v: &Value) -> PathBuf {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path.to_path_buf()
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Rows of a `s,x1,x2,theta,gamma` CSV.
pub fn read_line_csv(path: &Path) -> Vec<[f64; 5]> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.deserialize::<(f64, f64, f64, f64, f64)>()
        .map(|row| {
            let (s, x1, x2, t, g) = row.unwrap();
            [s, x1, x2, t, g]
        })
        .collect()
}

pub fn points(rows: &[[f64; 5]]) -> Vec<P> {
    rows.iter().map(|r| [r[1], r[2]]).collect()
}

fn sub(a: P, b: P) -> P {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: P, b: P) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Closest point of the polyline: `(distance, segment index, t in [0, 1])`.
fn nearest(poly: &[P], q: P) -> (f64, usize, f64) {
    let mut best = (f64::INFINITY, 0, 0.0);
    for (i, w) in poly.windows(2).enumerate() {
        let d = sub(w[1], w[0]);
        let len2 = dot(d, d);
        let t = if len2 > 0.0 { (dot(sub(q, w[0]), d) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let c = [w[0][0] + t * d[0], w[0][1] + t * d[1]];
        let e = sub(q, c);
        let dist = dot(e, e).sqrt();
        if dist < best.0 {
            best = (dist, i, t);
        }
    }
    best
}

pub fn distance(poly: &[P], q: P) -> f64 {
    nearest(poly, q).0
}

/// RMS distance from the points of `fitted` to `truth`, measured normal to
/// `truth`: points whose foot falls on an end vertex of `truth` (past its
/// ends) are left out. Returns the RMS and the number of points used.
pub fn rms_normal(fitted: &[P], truth: &[P]) -> (f64, usize) {
    let last = truth.len() - 2;
    let mut sum = 0.0;
    let mut n = 0;
    for &q in fitted {
        let (d, i, t) = nearest(truth, q);
        if (i == 0 && t == 0.0) || (i == last && t == 1.0) {
            continue;
        }
        sum += d * d;
        n += 1;
    }
    ((sum / n as f64).sqrt(), n)
}

pub fn hausdorff(a: &[P], b: &[P]) -> f64 {
    let ab = a.iter().map(|&q| distance(b, q)).fold(0.0, f64::max);
    let ba = b.iter().map(|&q| distance(a, q)).fold(0.0, f64::max);
    ab.max(ba)
}

pub const CANTILEVER_PX_PER_METER: f64 = 380.0;
pub const CANTILEVER_ORIGIN: P = [20.0, 150.0];

/// The desk-scale aluminium bar.
pub fn cantilever_spec() -> Value {
    json!({
        "length": 2.459,
        "radius": 4.95e-3,
        "young_modulus": 72e9,
        "density": 2700.0,
        "gravity": 9.81,
        "n_nodes": 2000
    })
}

pub fn cantilever_scene(noise_sigma: f64) -> Value {
    json!({
        "schema_version": 1,
        "width": 1000,
        "height": 500,
        "fiber_half_width": 3.0,
        "profile": "gaussian",
        "background": 0.1,
        "noise_sigma": noise_sigma,
        "seed": 1,
        "curve": {
            "kind": "cantilever",
            "spec": cantilever_spec(),
            "px_per_meter": CANTILEVER_PX_PER_METER,
            "origin": CANTILEVER_ORIGIN
        }
    })
}

pub fn cantilever_config(order: usize) -> Value {
    json!({
        "schema_version": 1,
        "basis": "legendre",
        "order": order,
        "half_width": 6.0,
        "seed": CANTILEVER_ORIGIN,
        "seed_angle_deg": 0.0,
        "segment_length": 20.0,
        "freeze": ["x0_1"],
        "detect_end": true
    })
}

pub const LOOP_LENGTH: f64 = 600.0;
pub const LOOP_ORIGIN: P = [30.0, 100.0];
pub const LOOP_THETA0: f64 = -0.05;

/// Fourier amplitudes (order 40) of a curvature made of a narrow Gaussian
/// bump turning the fiber by a full `2 pi`, plus two small ripples.
///
/// The bump is centred at `u = 1/2` with standard deviation `0.06`, so its
/// periodic extension has cosine coefficients
/// `2 (2 pi / L) (-1)^k exp(-2 pi^2 k^2 sigma^2)` and no sine part.
pub fn loop_amplitudes() -> Vec<f64> {
    let sigma: f64 = 0.06;
    let scale = 2.0 * PI / LOOP_LENGTH;
    let mut a = vec![0.0; 41];
    a[0] = scale;
    for k in 1..=20 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        a[2 * k - 1] = 2.0 * scale * sign * (-2.0 * PI * PI * (k * k) as f64 * sigma * sigma).exp();
    }
    // sin(2 pi 2 u) and cos(2 pi 3 u)
    a[4] += 0.002;
    a[5] -= 0.0015;
    a
}

pub fn loop_scene() -> Value {
    json!({
        "schema_version": 1,
        "width": 600,
        "height": 200,
        "fiber_half_width": 1.0,
        "profile": "gaussian",
        "background": 0.1,
        "noise_sigma": 0.1,
        "seed": 11,
        "curve": {
            "kind": "series",
            "basis": "fourier",
            "params": {
                "x0": LOOP_ORIGIN,
                "theta0": LOOP_THETA0,
                "a": loop_amplitudes(),
                "length": LOOP_LENGTH
            }
        }
    })
}

pub fn loop_config() -> Value {
    json!({
        "schema_version": 1,
        "basis": "fourier",
        "order": 60,
        "init_order": 20,
        "half_width": 2.0,
        "seed": LOOP_ORIGIN,
        "seed_angle_deg": (LOOP_THETA0 + 0.2).to_degrees(),
        "segment_length": 4.0,
        "freeze": ["x0_1"],
        "detect_end": true
    })
}

/// Straight or gently curved Legendre fiber on a 16-bit noiseless render.
pub fn series_scene(a: &[f64], length: f64, x0: P, theta0: f64, noise_sigma: f64) -> Value {
    json!({
        "schema_version": 1,
        "width": 400,
        "height": 200,
        "fiber_half_width": 3.0,
        "profile": "gaussian",
        "background": 0.1,
        "noise_sigma": noise_sigma,
        "seed": 3,
        "curve": {
            "kind": "series",
            "basis": "legendre",
            "params": { "x0": x0, "theta0": theta0, "a": a, "length": length }
        }
    })
}
