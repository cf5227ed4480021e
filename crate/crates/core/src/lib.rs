//! Virtual image correlation: identification of the mean line of a slender
//! object (fiber, rod, filament) in a grayscale image.
//!
//! The mean line is described analytically by its start point, start angle
//! and a truncated series for the curvature. A virtual beam with a cosine
//! luminance profile is laid along it, and the parameters are adjusted by
//! Gauss-Newton iterations until the virtual image matches the physical one
//! in the least squares sense.
//!
//! Typical use: [`init::trace`] a polyline from a seed point, convert it with
//! [`init::fit_series`], then refine with [`correlation::fit`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod beam_oracle;
pub mod correlation;
pub mod error;
pub mod exec;
pub mod export;
pub mod geometry;
pub mod image;
pub mod init;
pub mod length_detect;
pub mod synth;
pub mod virtual_beam;

pub use basis::{BasisFamily, CurvatureBasis};
pub use correlation::{fit, Correlator, FitFailure, FitOptions, FitReport, GradientForm};
pub use error::{Result, VicError};
pub use exec::Exec;
pub use geometry::{ParamId, ShapeParams, Vec2};
pub use image::{Boundary, Polarity, Raster};
pub use virtual_beam::{build_mesh, VirtualBeam};
