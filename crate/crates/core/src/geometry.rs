//! Mean-line kinematics of the virtual beam.
//!
//! Curvature is a truncated series in the basis functions, the angle is its
//! closed-form integral, and the mean line plus the sensitivity fields are
//! integrated with a cumulative composite Simpson rule on a uniform grid.
//!
//! Coordinates follow the image frame: `x1` is the column index (rightward),
//! `x2` the row index (downward), angles run from `+x1` toward `+x2`, and the
//! normal is the tangent rotated by `+pi/2` in that frame.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::basis::CurvatureBasis;
use crate::error::{Result, VicError};

pub type Vec2 = Vector2<f64>;

/// Index of `x0_1` in the parameter vector.
pub const X0_1: usize = 0;
/// Index of `x0_2` in the parameter vector.
pub const X0_2: usize = 1;
/// Index of `theta0` in the parameter vector.
pub const THETA0: usize = 2;
/// Index of `A_0`; `A_n` lives at `A0 + n`.
pub const A0: usize = 3;

/// Unknowns of the virtual beam plus its (fixed) length.
///
/// As a flat vector the layout is `[x0_1, x0_2, theta0, A_0, ..., A_N]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    /// Start of the mean line, pixels.
    pub x0: [f64; 2],
    /// Angle at the start, radians.
    pub theta0: f64,
    /// Series amplitudes, 1/pixels.
    pub a: Vec<f64>,
    /// Beam length, pixels.
    pub length: f64,
}

impl ShapeParams {
    pub fn new(x0: Vec2, theta0: f64, a: Vec<f64>, length: f64) -> Self {
        Self {
            x0: [x0.x, x0.y],
            theta0,
            a,
            length,
        }
    }

    /// Straight beam of the given series order.
    pub fn straight(x0: Vec2, theta0: f64, order: usize, length: f64) -> Self {
        Self::new(x0, theta0, vec![0.0; order + 1], length)
    }

    pub fn origin(&self) -> Vec2 {
        Vec2::new(self.x0[0], self.x0[1])
    }

    pub fn n_params(&self) -> usize {
        self.a.len() + A0
    }

    pub fn get(&self, k: usize) -> f64 {
        match k {
            X0_1 => self.x0[0],
            X0_2 => self.x0[1],
            THETA0 => self.theta0,
            _ => self.a[k - A0],
        }
    }

    pub fn set(&mut self, k: usize, value: f64) {
        match k {
            X0_1 => self.x0[0] = value,
            X0_2 => self.x0[1] = value,
            THETA0 => self.theta0 = value,
            _ => self.a[k - A0] = value,
        }
    }

    /// Same shape expressed at another series order: amplitudes are
    /// truncated or zero-padded.
    pub fn with_order(&self, order: usize) -> Self {
        let mut a = self.a.clone();
        a.resize(order + 1, 0.0);
        Self { a, ..self.clone() }
    }

    pub(crate) fn check(&self, basis: &CurvatureBasis) -> Result<()> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(VicError::Domain {
                what: "beam length",
                value: self.length,
            });
        }
        if self.a.len() != basis.len() {
            return Err(VicError::InvalidParameter(format!(
                "{} amplitudes for a basis of order {}",
                self.a.len(),
                basis.order()
            )));
        }
        Ok(())
    }

    fn check_s(&self, s: f64) -> Result<f64> {
        let tol = 1e-12 * self.length;
        if s < -tol || s > self.length + tol {
            return Err(VicError::Domain {
                what: "curvilinear abscissa",
                value: s,
            });
        }
        Ok((s / self.length).clamp(0.0, 1.0))
    }
}

/// Named parameter, as used by freeze masks and on the command line
/// (`x0_1`, `x0_2`, `theta0`, `a<n>`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamId {
    X01,
    X02,
    Theta0,
    A(usize),
}

impl ParamId {
    pub fn index(self) -> usize {
        match self {
            ParamId::X01 => X0_1,
            ParamId::X02 => X0_2,
            ParamId::Theta0 => THETA0,
            ParamId::A(n) => A0 + n,
        }
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamId::X01 => f.write_str("x0_1"),
            ParamId::X02 => f.write_str("x0_2"),
            ParamId::Theta0 => f.write_str("theta0"),
            ParamId::A(n) => write!(f, "a{n}"),
        }
    }
}

impl FromStr for ParamId {
    type Err = VicError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "x0_1" | "x01" | "x0,1" => Ok(ParamId::X01),
            "x0_2" | "x02" | "x0,2" => Ok(ParamId::X02),
            "theta0" | "theta_0" => Ok(ParamId::Theta0),
            _ => t
                .strip_prefix("a_")
                .or_else(|| t.strip_prefix('a'))
                .and_then(|n| n.parse().ok())
                .map(ParamId::A)
                .ok_or_else(|| VicError::InvalidParameter(format!("unknown parameter `{s}`"))),
        }
    }
}

/// One station of the mean line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSample {
    pub s: f64,
    pub x: Vec2,
    pub theta: f64,
    pub gamma: f64,
    pub tau: Vec2,
    pub nu: Vec2,
}

impl FrameSample {
    pub fn new(s: f64, x: Vec2, theta: f64, gamma: f64) -> Self {
        let (sin, cos) = theta.sin_cos();
        Self {
            s,
            x,
            theta,
            gamma,
            tau: Vec2::new(cos, sin),
            nu: Vec2::new(-sin, cos),
        }
    }
}

/// `X = x + r nu`.
pub fn surface_point(frame: &FrameSample, r: f64) -> Vec2 {
    frame.x + frame.nu * r
}

pub fn gamma_at(p: &ShapeParams, basis: &CurvatureBasis, s: f64) -> Result<f64> {
    p.check(basis)?;
    let u = p.check_s(s)?;
    let mut acc = 0.0;
    for (n, a) in p.a.iter().enumerate() {
        acc += a * basis.eval_gamma(n, u)?;
    }
    Ok(acc)
}

pub fn theta_at(p: &ShapeParams, basis: &CurvatureBasis, s: f64) -> Result<f64> {
    p.check(basis)?;
    let u = p.check_s(s)?;
    let mut acc = 0.0;
    for (n, a) in p.a.iter().enumerate() {
        acc += a * basis.eval_theta(n, u)?;
    }
    Ok(p.theta0 + p.length * acc)
}

/// Cumulative composite Simpson integral of uniformly spaced samples.
///
/// Each interval uses the three-point rule on its enclosing pair, so every
/// even index carries the exact composite Simpson value. With an even
/// number of samples the last interval borrows the preceding node.
pub fn cumulative_simpson<T>(values: &[T], h: f64, zero: T) -> Vec<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(zero);
    if n == 1 {
        return out;
    }
    if n == 2 {
        out.push((values[0] + values[1]) * (0.5 * h));
        return out;
    }
    let c = h / 12.0;
    let mut acc = zero;
    for i in 0..n - 1 {
        let inc = if i % 2 == 0 && i + 2 < n {
            values[i] * (5.0 * c) + values[i + 1] * (8.0 * c) + values[i + 2] * (-c)
        } else {
            values[i - 1] * (-c) + values[i] * (8.0 * c) + values[i + 1] * (5.0 * c)
        };
        acc = acc + inc;
        out.push(acc);
    }
    out
}

/// Basis functions tabulated on a uniform reduced grid of `n` points.
#[derive(Debug, Clone)]
pub struct BasisTable {
    n_samples: usize,
    n_funcs: usize,
    gamma: Vec<f64>,
    theta: Vec<f64>,
}

impl BasisTable {
    pub fn new(basis: &CurvatureBasis, n_samples: usize) -> Result<Self> {
        if n_samples < 2 {
            return Err(VicError::InvalidParameter(
                "at least two samples are required along the mean line".into(),
            ));
        }
        let nf = basis.len();
        let mut gamma = vec![0.0; nf * n_samples];
        let mut theta = vec![0.0; nf * n_samples];
        let mut g = vec![0.0; nf];
        let mut t = vec![0.0; nf];
        for i in 0..n_samples {
            let u = i as f64 / (n_samples - 1) as f64;
            basis.eval_all(u, &mut g, &mut t)?;
            for k in 0..nf {
                gamma[k * n_samples + i] = g[k];
                theta[k * n_samples + i] = t[k];
            }
        }
        Ok(Self {
            n_samples,
            n_funcs: nf,
            gamma,
            theta,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_funcs(&self) -> usize {
        self.n_funcs
    }

    pub fn gamma(&self, n: usize) -> &[f64] {
        &self.gamma[n * self.n_samples..(n + 1) * self.n_samples]
    }

    pub fn theta(&self, n: usize) -> &[f64] {
        &self.theta[n * self.n_samples..(n + 1) * self.n_samples]
    }
}

/// Mean line sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct MeanLine {
    pub frames: Vec<FrameSample>,
    pub ds: f64,
}

impl MeanLine {
    pub fn compute(p: &ShapeParams, table: &BasisTable) -> Result<Self> {
        if p.a.len() != table.n_funcs() {
            return Err(VicError::InvalidParameter(format!(
                "{} amplitudes for a table of {} functions",
                p.a.len(),
                table.n_funcs()
            )));
        }
        let n = table.n_samples();
        let ds = p.length / (n - 1) as f64;
        let mut theta = vec![p.theta0; n];
        let mut gamma = vec![0.0; n];
        for (k, &a) in p.a.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let (gt, tt) = (table.gamma(k), table.theta(k));
            for i in 0..n {
                gamma[i] += a * gt[i];
                theta[i] += p.length * a * tt[i];
            }
        }
        let tau: Vec<Vec2> = theta.iter().map(|t| Vec2::new(t.cos(), t.sin())).collect();
        let x = cumulative_simpson(&tau, ds, Vec2::zeros());
        let origin = p.origin();
        let frames = (0..n)
            .map(|i| FrameSample::new(i as f64 * ds, origin + x[i], theta[i], gamma[i]))
            .collect();
        Ok(Self { frames, ds })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Largest `|gamma| * half_width` along the line, with its abscissa.
    pub fn max_overlap(&self, half_width: f64) -> (f64, f64) {
        self.frames
            .iter()
            .map(|f| (f.gamma.abs() * half_width, f.s))
            .fold((0.0, 0.0), |acc, v| if v.0 > acc.0 { v } else { acc })
    }

    /// Fails with [`VicError::Overlap`] unless `|gamma| R < 1` everywhere.
    pub fn check_admissible(&self, half_width: f64) -> Result<()> {
        let (gr, s) = self.max_overlap(half_width);
        if gr >= 1.0 || !gr.is_finite() {
            return Err(VicError::Overlap { s, gamma_r: gr });
        }
        Ok(())
    }
}

/// Mean line of `p` on `n_samples` uniform stations (both ends included).
pub fn mean_line(p: &ShapeParams, basis: &CurvatureBasis, n_samples: usize) -> Result<Vec<FrameSample>> {
    p.check(basis)?;
    let table = BasisTable::new(basis, n_samples)?;
    Ok(MeanLine::compute(p, &table)?.frames)
}

/// Derivatives of the mean line with respect to every parameter.
///
/// `dx[k][i]` is `dx/dV_k` at station `i`; `dtheta` and `dgamma` are the
/// matching angle and curvature derivatives. The tangential part of the
/// surface-point derivative (`-r dtheta/dV_k tau`) is not included here.
#[derive(Debug, Clone)]
pub struct Sensitivities {
    pub dx: Vec<Vec<Vec2>>,
    pub dtheta: Vec<Vec<f64>>,
    pub dgamma: Vec<Vec<f64>>,
}

impl Sensitivities {
    pub fn compute(p: &ShapeParams, line: &MeanLine, table: &BasisTable) -> Self {
        let n = line.len();
        let nk = p.n_params();
        let ds = line.ds;
        let nu: Vec<Vec2> = line.frames.iter().map(|f| f.nu).collect();
        let mut dx = Vec::with_capacity(nk);
        let mut dtheta = Vec::with_capacity(nk);
        let mut dgamma = Vec::with_capacity(nk);
        dx.push(vec![Vec2::new(1.0, 0.0); n]);
        dx.push(vec![Vec2::new(0.0, 1.0); n]);
        dtheta.push(vec![0.0; n]);
        dtheta.push(vec![0.0; n]);
        dgamma.push(vec![0.0; n]);
        dgamma.push(vec![0.0; n]);
        dx.push(cumulative_simpson(&nu, ds, Vec2::zeros()));
        dtheta.push(vec![1.0; n]);
        dgamma.push(vec![0.0; n]);
        let mut buf = vec![Vec2::zeros(); n];
        for k in 0..table.n_funcs() {
            let tt = table.theta(k);
            for i in 0..n {
                buf[i] = nu[i] * (p.length * tt[i]);
            }
            dx.push(cumulative_simpson(&buf, ds, Vec2::zeros()));
            dtheta.push(tt.iter().map(|t| p.length * t).collect());
            dgamma.push(table.gamma(k).to_vec());
        }
        Self { dx, dtheta, dgamma }
    }
}

/// `dx/dV_k` for every parameter `k`, sampled on the same uniform grid as
/// [`mean_line`] with `n_samples` stations.
pub fn sensitivity_fields(
    p: &ShapeParams,
    basis: &CurvatureBasis,
    n_samples: usize,
) -> Result<Vec<Vec<Vec2>>> {
    p.check(basis)?;
    let table = BasisTable::new(basis, n_samples)?;
    let line = MeanLine::compute(p, &table)?;
    Ok(Sensitivities::compute(p, &line, &table).dx)
}
