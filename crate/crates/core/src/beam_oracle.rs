//! Equilibrium shape of a heavy cantilever rod (large-deflection elastica),
//! used as ground truth for fitted mean lines.
//!
//! The rod is clamped horizontally at `s = 0` and hangs under its own
//! weight. The frame has `x1` along the clamp and `x2` pointing down (the
//! direction of gravity), which matches the image frame, so curvature is
//! non-negative.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VicError};
use crate::geometry::Vec2;

const RELAXATION: f64 = 0.5;
const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000;

/// Physical description of the rod, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CantileverSpec {
    /// Rod length, m.
    pub length: f64,
    /// Cross-section radius, m.
    pub radius: f64,
    /// Young's modulus, Pa.
    pub young_modulus: f64,
    /// Mass density, kg/m^3.
    pub density: f64,
    /// Gravitational acceleration, m/s^2.
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    /// Number of uniform nodes along the rod.
    pub n_nodes: usize,
}

fn default_gravity() -> f64 {
    9.81
}

impl CantileverSpec {
    /// Weight per unit length, N/m.
    pub fn line_load(&self) -> f64 {
        self.density * self.gravity * std::f64::consts::PI * self.radius.powi(2)
    }

    /// Flexural rigidity `E I` with `I = pi R^4 / 4`, N m^2.
    pub fn bending_stiffness(&self) -> f64 {
        self.young_modulus * std::f64::consts::PI * self.radius.powi(4) / 4.0
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("rod length", self.length),
            ("rod radius", self.radius),
            ("Young's modulus", self.young_modulus),
            ("density", self.density),
            ("gravity", self.gravity),
        ];
        for (what, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(VicError::Domain { what, value });
            }
        }
        if self.n_nodes < 100 {
            return Err(VicError::InvalidParameter(format!(
                "n_nodes = {} is below the minimum of 100",
                self.n_nodes
            )));
        }
        Ok(())
    }
}

/// One node of a solved (or rescaled) shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticaSample {
    pub s: f64,
    pub x1: f64,
    pub x2: f64,
    pub theta: f64,
    pub gamma: f64,
}

impl ElasticaSample {
    pub fn point(&self) -> Vec2 {
        Vec2::new(self.x1, self.x2)
    }
}

fn cumtrapz(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(acc);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Bending moment `M(s) = q * int_s^L (x1(xi) - x1(s)) dxi`.
fn moments(x1: &[f64], s: &[f64], q: f64, h: f64) -> Vec<f64> {
    let c = cumtrapz(x1, h);
    let (c_end, l) = (*c.last().unwrap(), *s.last().unwrap());
    c.iter()
        .zip(x1)
        .zip(s)
        .map(|((&ci, &xi), &si)| q * ((c_end - ci) - xi * (l - si)))
        .collect()
}

/// Solves for the rod angle by under-relaxed fixed-point iteration on the
/// moment equation, with trapezoid quadrature on uniform nodes.
pub fn solve_elastica(spec: &CantileverSpec) -> Result<Vec<ElasticaSample>> {
    spec.validate()?;
    let n = spec.n_nodes;
    let h = spec.length / (n - 1) as f64;
    let s: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let q = spec.line_load();
    let ei = spec.bending_stiffness();

    let mut theta = vec![0.0f64; n];
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let x1 = cumtrapz(&theta.iter().map(|t| t.cos()).collect::<Vec<_>>(), h);
        let gamma: Vec<f64> = moments(&x1, &s, q, h).iter().map(|m| m / ei).collect();
        let next = cumtrapz(&gamma, h);
        let mut change = 0.0f64;
        for (t, nx) in theta.iter_mut().zip(&next) {
            let delta = nx - *t;
            change = change.max(delta.abs());
            *t += RELAXATION * delta;
        }
        if !change.is_finite() {
            break;
        }
        if change < TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(VicError::OracleDivergence {
            iterations: MAX_ITERATIONS,
        });
    }

    // curvature from the final angle so that the returned table is consistent
    let x1 = cumtrapz(&theta.iter().map(|t| t.cos()).collect::<Vec<_>>(), h);
    let x2 = cumtrapz(&theta.iter().map(|t| t.sin()).collect::<Vec<_>>(), h);
    let m = moments(&x1, &s, q, h);
    Ok((0..n)
        .map(|i| ElasticaSample {
            s: s[i],
            x1: x1[i],
            x2: x2[i],
            theta: theta[i],
            gamma: m[i] / ei,
        })
        .collect())
}

/// Maps a shape in meters into image pixels: positions scale and shift,
/// curvature scales inversely, angles are unchanged.
pub fn rescale_to_pixels(shape: &[ElasticaSample], px_per_meter: f64, origin: Vec2) -> Result<Vec<ElasticaSample>> {
    if !(px_per_meter > 0.0) || !px_per_meter.is_finite() {
        return Err(VicError::Domain {
            what: "pixels per meter",
            value: px_per_meter,
        });
    }
    Ok(shape
        .iter()
        .map(|e| ElasticaSample {
            s: e.s * px_per_meter,
            x1: origin.x + e.x1 * px_per_meter,
            x2: origin.y + e.x2 * px_per_meter,
            theta: e.theta,
            gamma: e.gamma / px_per_meter,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bar(n_nodes: usize) -> CantileverSpec {
        CantileverSpec {
            length: 2.459,
            radius: 4.95e-3,
            young_modulus: 72e9,
            density: 2700.0,
            gravity: 9.81,
            n_nodes,
        }
    }

    #[test]
    fn boundary_values_are_exact() {
        let shape = solve_elastica(&bar(2000)).unwrap();
        assert_eq!(shape[0].theta, 0.0);
        assert_eq!(shape.last().unwrap().gamma, 0.0);
        assert_eq!(shape[0].x1, 0.0);
        assert_eq!(shape[0].x2, 0.0);
    }

    #[test]
    fn small_load_matches_linear_theory() {
        let mut spec = bar(4001);
        spec.density = 1e-3;
        let shape = solve_elastica(&spec).unwrap();
        let tip = shape.last().unwrap().x2;
        let linear = spec.line_load() * spec.length.powi(4) / (8.0 * spec.bending_stiffness());
        assert!((tip - linear).abs() < 1e-3 * linear, "tip {tip} vs {linear}");
    }

    #[test]
    fn curvature_is_non_negative_and_non_increasing() {
        let shape = solve_elastica(&bar(1500)).unwrap();
        assert!(shape.iter().all(|e| e.gamma >= 0.0));
        assert!(shape.windows(2).all(|w| w[1].gamma <= w[0].gamma));
    }

    #[test]
    fn grid_convergence() {
        let spec = bar(2000);
        let a = *solve_elastica(&spec).unwrap().last().unwrap();
        let b = *solve_elastica(&bar(3999)).unwrap().last().unwrap();
        let d = ((a.x1 - b.x1).powi(2) + (a.x2 - b.x2).powi(2)).sqrt();
        assert!(d < 1e-6 * spec.length, "tip moved by {d}");
    }

    #[test]
    fn arc_length_is_preserved() {
        let spec = bar(2000);
        let shape = solve_elastica(&spec).unwrap();
        let arc: f64 = shape
            .windows(2)
            .map(|w| (w[1].point() - w[0].point()).norm())
            .sum();
        assert_abs_diff_eq!(arc, spec.length, epsilon = 1e-6 * spec.length);
    }

    #[test]
    fn rescale_examples() {
        let shape = solve_elastica(&bar(200)).unwrap();
        let same = rescale_to_pixels(&shape, 1.0, Vec2::zeros()).unwrap();
        assert_eq!(same, shape);
        let ppm = 3897.0 / 2.33;
        let px = rescale_to_pixels(&shape, ppm, Vec2::zeros()).unwrap();
        assert_abs_diff_eq!(px.last().unwrap().s, 4112.7, epsilon = 0.5);
        let doubled = rescale_to_pixels(&shape, 2.0 * ppm, Vec2::zeros()).unwrap();
        for (a, b) in px.iter().zip(&doubled) {
            assert_abs_diff_eq!(2.0 * a.x1, b.x1, epsilon = 1e-9);
            assert_abs_diff_eq!(2.0 * a.x2, b.x2, epsilon = 1e-9);
        }
        assert!(rescale_to_pixels(&shape, 0.0, Vec2::zeros()).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(solve_elastica(&bar(50)).is_err());
        let mut spec = bar(200);
        spec.young_modulus = -1.0;
        assert!(solve_elastica(&spec).is_err());
    }

    #[test]
    fn extreme_load_diverges() {
        let mut spec = bar(200);
        spec.density *= 1e4;
        assert!(matches!(
            solve_elastica(&spec),
            Err(VicError::OracleDivergence { .. })
        ));
    }
}
