//! Fiber end detection from the residual per unit length.
//!
//! When the virtual beam runs past the tip of the fiber, the residual per
//! unit length jumps to the background level `int g^2 dr`. The detector
//! looks for that jump with robust statistics taken on the first half of
//! the beam, which is assumed to lie on the fiber.

use serde::{Deserialize, Serialize};

use crate::basis::CurvatureBasis;
use crate::correlation::Correlator;
use crate::error::Result;
use crate::geometry::ShapeParams;
use crate::image::{median_in_place, Raster};
use crate::virtual_beam::VirtualBeam;

/// Threshold above the median, in units of the median absolute deviation.
pub const MAD_FACTOR: f64 = 4.0;

/// `(s_i, phi_i)` with `phi_i` the transverse residual at station `s_i`.
pub fn phi_profile(
    raster: &Raster,
    p: &ShapeParams,
    basis: &CurvatureBasis,
    beam: &VirtualBeam,
) -> Result<Vec<(f64, f64)>> {
    Correlator::new(raster, basis, beam)?.phi_profile(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "s", rename_all = "kebab-case")]
pub enum EndDetection {
    /// Arc position of the detected end, pixels.
    End(f64),
    NoEndFound,
}

impl EndDetection {
    pub fn position(self) -> Option<f64> {
        match self {
            EndDetection::End(s) => Some(s),
            EndDetection::NoEndFound => None,
        }
    }
}

/// Finds the first station where the residual, averaged over the trailing
/// `2R` of arc, exceeds `median + 4 MAD` of the first half and stays above
/// for at least `2R`.
///
/// The window trails the station so that a step in the residual is reported
/// where it starts rather than `R` ahead of it.
pub fn detect_end(profile: &[(f64, f64)], half_width: f64) -> EndDetection {
    let n = profile.len();
    if n < 4 {
        return EndDetection::NoEndFound;
    }
    let ds = (profile[n - 1].0 - profile[0].0) / (n - 1) as f64;
    let span = ((2.0 * half_width / ds).round() as usize).max(1);

    let mut head: Vec<f64> = profile[..n / 2].iter().map(|&(_, v)| v).collect();
    let median = median_in_place(&mut head);
    for v in head.iter_mut() {
        *v = (*v - median).abs();
    }
    let mad = median_in_place(&mut head);
    // the relative guard keeps window-sum rounding on a flat profile below it
    let threshold = median + MAD_FACTOR * mad + 1e-9 * median.abs();

    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &(_, v) in profile {
        prefix.push(prefix.last().unwrap() + v);
    }
    let smoothed: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(span);
            (prefix[i + 1] - prefix[lo]) / (i + 1 - lo) as f64
        })
        .collect();

    let mut i = 0;
    while i < n {
        if smoothed[i] > threshold {
            let end = i + span;
            if end >= n {
                break;
            }
            match (i..=end).find(|&k| smoothed[k] <= threshold) {
                None => return EndDetection::End(profile[i].0),
                Some(k) => i = k,
            }
        }
        i += 1;
    }
    EndDetection::NoEndFound
}
