//! Synthetic fiber images with known mean lines.
//!
//! The curve is sampled at 10 points per pixel and treated as a polyline;
//! each pixel is averaged over a 4x4 grid of sub-samples whose luminance
//! depends on the distance to that polyline.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisFamily, CurvatureBasis};
use crate::beam_oracle::{rescale_to_pixels, solve_elastica, CantileverSpec};
use crate::error::{Result, VicError};
use crate::geometry::{mean_line, FrameSample, ShapeParams, Vec2};
use crate::image::Raster;

const SUPERSAMPLE: usize = 4;
const POINTS_PER_PIXEL: f64 = 10.0;

/// Transverse luminance profile of the rendered fiber, as a function of
/// `u = d / w` for a fiber of half-width `w`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `(1 + cos(pi u)) / 2` for `u <= 1`.
    Cosine,
    /// `exp(-2 u^2)`, i.e. standard deviation `w / 2`.
    #[default]
    Gaussian,
    /// 1 for `u <= 1`.
    FlatDisk,
}

impl Profile {
    pub fn eval(self, u: f64) -> f64 {
        let u = u.abs();
        match self {
            Profile::Cosine if u <= 1.0 => 0.5 * (1.0 + (std::f64::consts::PI * u).cos()),
            Profile::Gaussian if u <= self.support() => (-2.0 * u * u).exp(),
            Profile::FlatDisk if u <= 1.0 => 1.0,
            _ => 0.0,
        }
    }

    /// Value of `u` beyond which the profile is zero.
    pub fn support(self) -> f64 {
        match self {
            Profile::Gaussian => 3.5,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Cosine => "cosine",
            Profile::Gaussian => "gaussian",
            Profile::FlatDisk => "flatdisk",
        })
    }
}

impl FromStr for Profile {
    type Err = VicError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Profile::Cosine),
            "gaussian" => Ok(Profile::Gaussian),
            "flatdisk" | "flat-disk" => Ok(Profile::FlatDisk),
            other => Err(VicError::InvalidParameter(format!("unknown profile '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    pub width: usize,
    pub height: usize,
    /// Half-width `w` of the fiber, pixels.
    pub fiber_half_width: f64,
    pub profile: Profile,
    /// Luminance away from the fiber; the fiber peaks at 1.
    pub background: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Mean line of `p` sampled at 10 points per pixel.
pub fn curve_points(p: &ShapeParams, basis: &CurvatureBasis) -> Result<Vec<Vec2>> {
    let n = ((p.length * POINTS_PER_PIXEL).ceil() as usize + 1).max(3);
    Ok(mean_line(p, basis, n)?.into_iter().map(|f| f.x).collect())
}

/// Renders the fiber whose mean line is `p`.
pub fn render(p: &ShapeParams, basis: &CurvatureBasis, opts: &RenderOptions) -> Result<Raster> {
    render_curve(&curve_points(p, basis)?, opts)
}

/// Renders a fiber along an arbitrary polyline.
pub fn render_curve(points: &[Vec2], opts: &RenderOptions) -> Result<Raster> {
    let w = opts.fiber_half_width;
    if !(w > 0.0) || !w.is_finite() {
        return Err(VicError::Domain {
            what: "fiber half-width",
            value: w,
        });
    }
    if !(0.0..1.0).contains(&opts.background) {
        return Err(VicError::Domain {
            what: "background luminance",
            value: opts.background,
        });
    }
    if !(opts.noise_sigma >= 0.0) || !opts.noise_sigma.is_finite() {
        return Err(VicError::Domain {
            what: "noise standard deviation",
            value: opts.noise_sigma,
        });
    }
    if opts.width == 0 || opts.height == 0 || points.len() < 2 {
        return Err(VicError::InvalidParameter("empty render request".into()));
    }
    let margin = w + 2.0;
    for q in points {
        let inside = q.x >= margin
            && q.y >= margin
            && q.x <= opts.width as f64 - 1.0 - margin
            && q.y <= opts.height as f64 - 1.0 - margin;
        if !inside {
            return Err(VicError::RenderBounds { x: q.x, y: q.y });
        }
    }

    let cutoff = opts.profile.support() * w;
    let dist = distance_grid(points, opts.width, opts.height, cutoff);
    let (sw, n_sub) = (opts.width * SUPERSAMPLE, (SUPERSAMPLE * SUPERSAMPLE) as f64);
    let amplitude = 1.0 - opts.background;
    let mut data = Vec::with_capacity(opts.width * opts.height);
    for row in 0..opts.height {
        for col in 0..opts.width {
            let mut acc = 0.0;
            for b in 0..SUPERSAMPLE {
                let base = (row * SUPERSAMPLE + b) * sw + col * SUPERSAMPLE;
                for d in &dist[base..base + SUPERSAMPLE] {
                    acc += opts.profile.eval(*d as f64 / w);
                }
            }
            data.push(opts.background + amplitude * acc / n_sub);
        }
    }
    if opts.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let normal = Normal::new(0.0, opts.noise_sigma).map_err(|e| VicError::InvalidParameter(e.to_string()))?;
        for v in data.iter_mut() {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    for v in data.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Raster::from_unit_values(opts.width, opts.height, data)
}

/// Position of sub-sample `k` of pixel `i` (pixel centers at integers).
#[inline]
fn sub_coord(index: usize) -> f64 {
    (index as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5
}

/// Distance from each sub-sample to the polyline, saturated at `cutoff`.
/// Row-major over the supersampled grid.
pub(crate) fn distance_grid(points: &[Vec2], width: usize, height: usize, cutoff: f64) -> Vec<f32> {
    let (sw, sh) = (width * SUPERSAMPLE, height * SUPERSAMPLE);
    let mut grid = vec![cutoff as f32; sw * sh];
    let scale = SUPERSAMPLE as f64;
    let to_index = |x: f64, n: usize| -> (usize, usize) {
        let lo = ((x - cutoff + 0.5) * scale - 0.5).floor().max(0.0) as usize;
        let hi = (((x + cutoff + 0.5) * scale - 0.5).ceil().max(0.0) as usize).min(n - 1);
        (lo, hi)
    };
    for seg in points.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let (x0, x1) = to_index(a.x.min(b.x), sw);
        let (_, x1b) = to_index(a.x.max(b.x), sw);
        let (y0, y1) = to_index(a.y.min(b.y), sh);
        let (_, y1b) = to_index(a.y.max(b.y), sh);
        let (x1, y1) = (x1.max(x1b), y1.max(y1b));
        for sy in y0..=y1 {
            let y = sub_coord(sy);
            for sx in x0..=x1 {
                let q = Vec2::new(sub_coord(sx), y);
                let d = segment_distance(q, a, b) as f32;
                let cell = &mut grid[sy * sw + sx];
                if d < *cell {
                    *cell = d;
                }
            }
        }
    }
    grid
}

fn segment_distance(q: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((q - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (q - (a + ab * t)).norm()
}

/// Distance from `q` to the polyline through `points`.
pub fn distance_to_curve(points: &[Vec2], q: Vec2) -> f64 {
    points
        .windows(2)
        .map(|s| segment_distance(q, s[0], s[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Source of the rendered mean line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SceneCurve {
    /// A curvature series; the order is the number of amplitudes minus one.
    Series { basis: BasisFamily, params: ShapeParams },
    /// A heavy cantilever mapped into pixels.
    Cantilever {
        spec: CantileverSpec,
        px_per_meter: f64,
        /// Pixel position of the clamp.
        origin: [f64; 2],
    },
}

/// JSON description of a synthetic image. Lengths are in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub schema_version: u32,
    pub width: usize,
    pub height: usize,
    pub fiber_half_width: f64,
    #[serde(default)]
    pub profile: Profile,
    #[serde(default)]
    pub background: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    pub curve: SceneCurve,
}

impl Scene {
    pub fn render_options(&self) -> RenderOptions {
        RenderOptions {
            width: self.width,
            height: self.height,
            fiber_half_width: self.fiber_half_width,
            profile: self.profile,
            background: self.background,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
        }
    }

    /// The true mean line, densely sampled, with its angle and curvature.
    pub fn truth_frames(&self) -> Result<Vec<FrameSample>> {
        match &self.curve {
            SceneCurve::Series { basis, params } => {
                let order = params.a.len().checked_sub(1).ok_or_else(|| {
                    VicError::InvalidParameter("series needs at least one amplitude".into())
                })?;
                let n = (params.length * POINTS_PER_PIXEL).ceil() as usize + 1;
                mean_line(params, &CurvatureBasis::new(*basis, order)?, n.max(3))
            }
            SceneCurve::Cantilever {
                spec,
                px_per_meter,
                origin,
            } => {
                let shape = solve_elastica(spec)?;
                let px = rescale_to_pixels(&shape, *px_per_meter, Vec2::new(origin[0], origin[1]))?;
                Ok(px
                    .iter()
                    .map(|e| FrameSample::new(e.s, e.point(), e.theta, e.gamma))
                    .collect())
            }
        }
    }

    pub fn curve_points(&self) -> Result<Vec<Vec2>> {
        Ok(self.truth_frames()?.into_iter().map(|f| f.x).collect())
    }

    pub fn render(&self) -> Result<(Raster, Vec<FrameSample>)> {
        let frames = self.truth_frames()?;
        let points: Vec<Vec2> = frames.iter().map(|f| f.x).collect();
        let raster = render_curve(&points, &self.render_options())?;
        Ok((raster, frames))
    }
}
