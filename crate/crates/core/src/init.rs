//! Starting point for the correlation: the fiber is traced with straight
//! segments of fixed length, each one rotated about its start to minimize
//! its own correlation residual, and the segment angles are then fitted by
//! the angle series of the curvature basis.

use nalgebra::{DMatrix, DVector};

use crate::basis::CurvatureBasis;
use crate::correlation::Correlator;
use crate::error::{Result, VicError};
use crate::geometry::{theta_at, ShapeParams, Vec2};
use crate::image::{Boundary, Raster};
use crate::virtual_beam::{build_mesh, luminance_unchecked, VirtualBeam, DEFAULT_REFINE};

const SCAN_HALF_RANGE: f64 = 60.0 * std::f64::consts::PI / 180.0;
const SCAN_STEP: f64 = 5.0 * std::f64::consts::PI / 180.0;
const GOLDEN_ITERS: usize = 40;
/// A segment whose best residual exceeds this fraction of the background
/// residual is taken to have left the fiber.
pub const STOP_RATIO: f64 = 0.8;

/// Straight-segment approximation of the fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    /// Segment end points; `points.len() == angles.len() + 1`.
    pub points: Vec<Vec2>,
    /// Direction of each segment, radians.
    pub angles: Vec<f64>,
    /// Segment length `h`, pixels.
    pub segment_length: f64,
}

impl Polyline {
    pub fn n_segments(&self) -> usize {
        self.angles.len()
    }

    /// Total traced length.
    pub fn length(&self) -> f64 {
        self.segment_length * self.n_segments() as f64
    }

    /// Arc position attributed to each segment angle: the segment midpoint,
    /// where the chord direction matches the tangent of a smooth curve to
    /// second order.
    pub fn abscissae(&self) -> Vec<f64> {
        (0..self.n_segments())
            .map(|q| (q as f64 + 0.5) * self.segment_length)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub segment_length: f64,
    /// Half-width of the segment's virtual beam.
    pub half_width: f64,
    pub max_segments: usize,
    pub refine: f64,
}

impl TraceOptions {
    pub fn new(segment_length: f64, half_width: f64) -> Self {
        Self {
            segment_length,
            half_width,
            max_segments: 10_000,
            refine: DEFAULT_REFINE,
        }
    }
}

/// Expected residual of a straight segment lying on background only: the
/// virtual profile against a uniform level plus the pixel variance.
fn background_phi(raster: &Raster, beam: &VirtualBeam) -> f64 {
    let (level, sigma) = raster.robust_level();
    let dr = beam.dr();
    let per_length: f64 = beam
        .r_nodes()
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            let d = level - luminance_unchecked(r, beam.half_width);
            VirtualBeam::end_weight(j, beam.n_r) * dr * (d * d + sigma * sigma)
        })
        .sum();
    per_length * beam.length
}

struct SegmentSearch<'a> {
    corr: Correlator<'a>,
    length: f64,
}

impl SegmentSearch<'_> {
    /// Residual of the segment from `start` at `angle`; segments that leave
    /// the image count as infinitely bad.
    fn phi(&self, start: Vec2, angle: f64) -> Result<f64> {
        let p = ShapeParams::new(start, angle, vec![0.0], self.length);
        match self.corr.phi(&p) {
            Ok(v) => Ok(v),
            Err(VicError::OutOfBounds { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// Best angle within 60 degrees of `center`: a 5 degree scan picks the
    /// basin, golden-section search refines inside it.
    fn best_angle(&self, start: Vec2, center: f64) -> Result<(f64, f64)> {
        let steps = (SCAN_HALF_RANGE / SCAN_STEP).round() as i32;
        let mut best = (center, f64::INFINITY);
        for k in -steps..=steps {
            let a = center + k as f64 * SCAN_STEP;
            let v = self.phi(start, a)?;
            if v < best.1 {
                best = (a, v);
            }
        }
        if !best.1.is_finite() {
            return Ok(best);
        }
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (best.0 - SCAN_STEP, best.0 + SCAN_STEP);
        let mut c = hi - inv_phi * (hi - lo);
        let mut d = lo + inv_phi * (hi - lo);
        let mut fc = self.phi(start, c)?;
        let mut fd = self.phi(start, d)?;
        for _ in 0..GOLDEN_ITERS {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - inv_phi * (hi - lo);
                fc = self.phi(start, c)?;
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + inv_phi * (hi - lo);
                fd = self.phi(start, d)?;
            }
        }
        let (a, v) = if fc < fd { (c, fc) } else { (d, fd) };
        Ok(if v < best.1 { (a, v) } else { best })
    }
}

/// Follows the fiber from `seed` with straight segments, starting around
/// `seed_angle` (radians).
pub fn trace(raster: &Raster, seed: Vec2, seed_angle: f64, opts: &TraceOptions) -> Result<Polyline> {
    let h = opts.segment_length;
    if !(h >= 2.0 * opts.half_width) || !h.is_finite() {
        return Err(VicError::Domain {
            what: "segment length (must be at least twice the half-width)",
            value: h,
        });
    }
    let basis = CurvatureBasis::legendre(0)?;
    let beam = build_mesh(h, opts.half_width, opts.refine)?;
    let search = SegmentSearch {
        corr: Correlator::new(raster, &basis, &beam)?.with_boundary(Boundary::Abort),
        length: h,
    };
    let background = background_phi(raster, &beam);

    let mut points = vec![seed];
    let mut angles = Vec::new();
    let mut heading = seed_angle;
    while angles.len() < opts.max_segments {
        let start = *points.last().unwrap();
        let (angle, value) = search.best_angle(start, heading)?;
        if !(value <= STOP_RATIO * background) {
            if angles.is_empty() {
                return Err(VicError::Seed {
                    phi: value,
                    background,
                });
            }
            break;
        }
        angles.push(angle);
        points.push(start + Vec2::new(angle.cos(), angle.sin()) * h);
        heading = angle;
    }
    Ok(Polyline {
        points,
        angles,
        segment_length: h,
    })
}

/// Fits the segment angles with the angle series of `basis` over the
/// traced length.
pub fn fit_series(poly: &Polyline, basis: &CurvatureBasis) -> Result<ShapeParams> {
    fit_series_with_length(poly, basis, poly.length())
}

/// As [`fit_series`] for a beam of a prescribed length. Segments whose
/// midpoint lies beyond `length` are ignored.
pub fn fit_series_with_length(poly: &Polyline, basis: &CurvatureBasis, length: f64) -> Result<ShapeParams> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(VicError::Domain {
            what: "beam length",
            value: length,
        });
    }
    let rows: Vec<(f64, f64)> = poly
        .abscissae()
        .into_iter()
        .zip(poly.angles.iter().copied())
        .filter(|(s, _)| *s <= length)
        .collect();
    fit_angles(&rows, basis, length, poly.points[0])
}

/// Re-expresses `p` over the shorter arc `[0, length]`: the start point is
/// kept and the angle series is refitted to the angle of `p` sampled on the
/// retained arc.
pub fn restrict_length(p: &ShapeParams, basis: &CurvatureBasis, length: f64) -> Result<ShapeParams> {
    if !(length > 0.0 && length <= p.length) {
        return Err(VicError::Domain {
            what: "restricted length",
            value: length,
        });
    }
    let m = (8 * (basis.len() + 1)).max(400);
    let rows = (0..m)
        .map(|i| {
            let s = (i as f64 + 0.5) * length / m as f64;
            theta_at(p, basis, s).map(|t| (s, t))
        })
        .collect::<Result<Vec<_>>>()?;
    fit_angles(&rows, basis, length, p.origin())
}

/// Solves `theta_q / L = A_{-1} + sum_n A_n theta~_n(s_q / L)` in the least
/// squares sense, with `theta0 = A_{-1} L`.
fn fit_angles(rows: &[(f64, f64)], basis: &CurvatureBasis, length: f64, origin: Vec2) -> Result<ShapeParams> {
    let cols = basis.len() + 1;
    if rows.len() < cols {
        return Err(VicError::InitRank);
    }
    let mut design = DMatrix::zeros(rows.len(), cols);
    let mut rhs = DVector::zeros(rows.len());
    let mut theta = vec![0.0; basis.len()];
    let mut gamma = vec![0.0; basis.len()];
    for (q, &(s, angle)) in rows.iter().enumerate() {
        basis.eval_all(s / length, &mut gamma, &mut theta)?;
        design[(q, 0)] = 1.0;
        for (n, t) in theta.iter().enumerate() {
            design[(q, n + 1)] = *t;
        }
        rhs[q] = angle / length;
    }
    let svd = design.svd(true, true);
    let top = svd.singular_values.max();
    if !(svd.singular_values.min() > 1e-12 * top) {
        return Err(VicError::InitRank);
    }
    let coef = svd
        .solve(&rhs, 0.0)
        .map_err(|e| VicError::InvalidParameter(e.to_string()))?;
    Ok(ShapeParams::new(
        origin,
        coef[0] * length,
        coef.iter().skip(1).copied().collect(),
        length,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{render, Profile, RenderOptions};
    use approx::assert_abs_diff_eq;

    fn scene(p: &ShapeParams, b: &CurvatureBasis, w: usize, h: usize) -> Raster {
        render(
            p,
            b,
            &RenderOptions {
                width: w,
                height: h,
                fiber_half_width: 2.0,
                profile: Profile::Gaussian,
                background: 0.1,
                noise_sigma: 0.0,
                seed: 0,
            },
        )
        .unwrap()
    }

    fn poly_from(angles: Vec<f64>, h: f64) -> Polyline {
        let mut points = vec![Vec2::new(10.0, 10.0)];
        for a in &angles {
            let last = *points.last().unwrap();
            points.push(last + Vec2::new(a.cos(), a.sin()) * h);
        }
        Polyline {
            points,
            angles,
            segment_length: h,
        }
    }

    #[test]
    fn straight_fiber_from_a_wrong_seed_angle() {
        let b = CurvatureBasis::legendre(0).unwrap();
        let angle = 0.35;
        let truth = ShapeParams::new(Vec2::new(15.0, 20.0), angle, vec![0.0], 110.0);
        let img = scene(&truth, &b, 140, 80);
        let poly = trace(&img, truth.origin(), angle + 20f64.to_radians(), &TraceOptions::new(10.0, 4.0)).unwrap();
        assert!(poly.n_segments() >= 9);
        for a in &poly.angles {
            assert!((a - angle).abs() < 0.5f64.to_radians(), "{a} vs {angle}");
        }
    }

    #[test]
    fn circular_arc_increments() {
        let b = CurvatureBasis::legendre(0).unwrap();
        let rho = 100.0;
        let truth = ShapeParams::new(Vec2::new(20.0, 20.0), 0.0, vec![1.0 / rho], 250.0);
        let img = scene(&truth, &b, 230, 230);
        let h = rho / 10.0;
        let poly = trace(&img, truth.origin(), 0.0, &TraceOptions::new(h, 4.0)).unwrap();
        assert!(poly.n_segments() >= 20, "{} segments", poly.n_segments());
        let inc: Vec<f64> = poly.angles.windows(2).map(|w| w[1] - w[0]).collect();
        // the first segment starts on the fiber without knowing its tangent;
        // that lag decays within a few segments
        for d in &inc[4..20] {
            assert!((d - h / rho).abs() < 0.1 * h / rho, "increment {d}");
        }
        let mean = inc.iter().sum::<f64>() / inc.len() as f64;
        assert!((mean - h / rho).abs() < 0.02 * h / rho, "mean increment {mean}");
    }

    #[test]
    fn seed_on_background_fails() {
        let b = CurvatureBasis::legendre(0).unwrap();
        let truth = ShapeParams::new(Vec2::new(15.0, 20.0), 0.0, vec![0.0], 100.0);
        let img = scene(&truth, &b, 140, 100);
        let err = trace(&img, Vec2::new(30.0, 70.0), 0.0, &TraceOptions::new(10.0, 4.0)).unwrap_err();
        assert!(matches!(err, VicError::Seed { .. }));
    }

    #[test]
    fn constant_angles_give_pure_rotation() {
        for b in [CurvatureBasis::legendre(3).unwrap(), CurvatureBasis::fourier(4).unwrap()] {
            let poly = poly_from(vec![0.7; 12], 5.0);
            let p = fit_series(&poly, &b).unwrap();
            assert_abs_diff_eq!(p.theta0, 0.7, epsilon = 1e-10);
            for a in &p.a {
                assert_abs_diff_eq!(*a, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn consistent_angles_are_recovered() {
        let b = CurvatureBasis::legendre(3).unwrap();
        let truth = ShapeParams::new(Vec2::new(10.0, 10.0), 0.2, vec![0.004, -0.002, 0.001, 0.0005], 60.0);
        let h = 60.0 / 5.0;
        let angles: Vec<f64> = (0..5)
            .map(|q| theta_at(&truth, &b, (q as f64 + 0.5) * h).unwrap())
            .collect();
        let p = fit_series(&poly_from(angles.clone(), h), &b).unwrap();
        assert_abs_diff_eq!(p.theta0, truth.theta0, epsilon = 1e-9);
        for (a, t) in p.a.iter().zip(&truth.a) {
            assert!((a - t).abs() <= 1e-6 * t.abs(), "{a} vs {t}");
        }
        // square system: the series passes through every angle
        for (q, ang) in angles.iter().enumerate() {
            assert_abs_diff_eq!(theta_at(&p, &b, (q as f64 + 0.5) * h).unwrap(), *ang, epsilon = 1e-9);
        }
    }

    #[test]
    fn linear_angle_is_a_circle() {
        let b = CurvatureBasis::legendre(2).unwrap();
        let h = 4.0;
        let slope = 0.01;
        let angles: Vec<f64> = (0..15).map(|q| 0.1 + slope * (q as f64 + 0.5) * h).collect();
        let p = fit_series(&poly_from(angles, h), &b).unwrap();
        assert_abs_diff_eq!(p.theta0, 0.1, epsilon = 1e-10);
        assert_abs_diff_eq!(p.a[0], slope, epsilon = 1e-12);
        assert_abs_diff_eq!(p.a[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.a[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn too_few_segments_is_rank_deficient() {
        let b = CurvatureBasis::legendre(5).unwrap();
        assert!(matches!(
            fit_series(&poly_from(vec![0.0; 4], 5.0), &b),
            Err(VicError::InitRank)
        ));
    }

    #[test]
    fn restriction_keeps_the_retained_arc() {
        let b = CurvatureBasis::legendre(4).unwrap();
        let p = ShapeParams::new(Vec2::new(5.0, 7.0), 0.3, vec![0.002, -0.001, 0.0005, 0.0, 0.0], 300.0);
        let r = restrict_length(&p, &b, 240.0).unwrap();
        assert_eq!(r.origin(), p.origin());
        assert_eq!(r.length, 240.0);
        // a degree-3 polynomial on [0, 1] stays in the span on [0, 0.8]
        for k in 0..=24 {
            let s = k as f64 * 10.0;
            assert_abs_diff_eq!(theta_at(&r, &b, s).unwrap(), theta_at(&p, &b, s).unwrap(), epsilon = 1e-9);
        }
        assert!(restrict_length(&p, &b, 301.0).is_err());
    }
}
