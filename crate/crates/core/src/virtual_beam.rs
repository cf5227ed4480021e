//! The virtual image: a cosine luminance ridge over the `(s, r)` domain of
//! the beam, discretized on a tensor mesh with trapezoid weights.

use std::f64::consts::PI;

use crate::error::{Result, VicError};

/// Default mesh density, nodes per pixel along both axes.
pub const DEFAULT_REFINE: f64 = 3.0;

/// Upper bound on mesh nodes accepted by [`build_mesh`].
pub const MAX_MESH_NODES: u64 = 100_000_000;

fn check_r(r: f64, half_width: f64) -> Result<()> {
    if !(half_width > 0.0) {
        return Err(VicError::Domain {
            what: "beam half-width",
            value: half_width,
        });
    }
    if r.abs() > half_width * (1.0 + 1e-12) {
        return Err(VicError::Domain {
            what: "transverse coordinate",
            value: r,
        });
    }
    Ok(())
}

/// `l(r) = (1 + cos(pi r / R)) / 2`, the luminance of the virtual beam.
pub fn luminance(r: f64, half_width: f64) -> Result<f64> {
    check_r(r, half_width)?;
    Ok(luminance_unchecked(r, half_width))
}

/// `l'(r) = -(pi / 2R) sin(pi r / R)`.
pub fn luminance_slope(r: f64, half_width: f64) -> Result<f64> {
    check_r(r, half_width)?;
    Ok(luminance_slope_unchecked(r, half_width))
}

#[inline]
pub(crate) fn luminance_unchecked(r: f64, half_width: f64) -> f64 {
    0.5 * (1.0 + (PI * r / half_width).cos())
}

#[inline]
pub(crate) fn luminance_slope_unchecked(r: f64, half_width: f64) -> f64 {
    -(PI / (2.0 * half_width)) * (PI * r / half_width).sin()
}

/// Mesh of the virtual image for a beam of a given length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualBeam {
    /// Half-width `R`, pixels.
    pub half_width: f64,
    /// Beam length `L`, pixels.
    pub length: f64,
    /// Transverse node count (odd, so `r = 0` is a mesh line).
    pub n_r: usize,
    /// Longitudinal node count.
    pub n_s: usize,
}

/// Builds the mesh with `refine` nodes per pixel: `n_r` is the smallest odd
/// integer `>= 2 R refine + 1` and `n_s = ceil(L refine) + 1`.
pub fn build_mesh(length: f64, half_width: f64, refine: f64) -> Result<VirtualBeam> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(VicError::Domain {
            what: "beam length",
            value: length,
        });
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(VicError::Domain {
            what: "beam half-width",
            value: half_width,
        });
    }
    if !(refine >= 1.0) || !refine.is_finite() {
        return Err(VicError::Domain {
            what: "mesh refinement",
            value: refine,
        });
    }
    // the small offset keeps exact products such as 2 * 10 * 3 from rounding up
    let mut n_r = (2.0 * half_width * refine + 1.0 - 1e-9).ceil() as u64;
    if n_r.is_multiple_of(2) {
        n_r += 1;
    }
    n_r = n_r.max(3);
    let n_s = (length * refine - 1e-9).ceil() as u64 + 1;
    let n_s = n_s.max(3);
    let nodes = n_r.saturating_mul(n_s);
    if nodes > MAX_MESH_NODES {
        return Err(VicError::MeshTooLarge { nodes });
    }
    Ok(VirtualBeam {
        half_width,
        length,
        n_r: n_r as usize,
        n_s: n_s as usize,
    })
}

impl VirtualBeam {
    pub fn dr(&self) -> f64 {
        2.0 * self.half_width / (self.n_r - 1) as f64
    }

    pub fn ds(&self) -> f64 {
        self.length / (self.n_s - 1) as f64
    }

    /// Transverse node positions, from `-R` to `R`.
    pub fn r_nodes(&self) -> Vec<f64> {
        let dr = self.dr();
        (0..self.n_r)
            .map(|j| -self.half_width + j as f64 * dr)
            .collect()
    }

    /// Trapezoid weight (1 inside, 1/2 on the ends) of node `j` among `n`.
    #[inline]
    pub fn end_weight(j: usize, n: usize) -> f64 {
        if j == 0 || j + 1 == n {
            0.5
        } else {
            1.0
        }
    }

    pub fn nodes(&self) -> usize {
        self.n_r * self.n_s
    }

    /// Same mesh density on a beam of a different length.
    pub fn with_length(&self, length: f64, refine: f64) -> Result<Self> {
        build_mesh(length, self.half_width, refine)
    }
}
