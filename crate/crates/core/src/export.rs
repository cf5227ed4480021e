//! CSV and PNG artifacts.
//!
//! Mean lines and oracle shapes share the column schema
//! `s, x1, x2, theta, gamma` (pixels or meters, radians, inverse length).

use std::path::Path;

use serde::Serialize;

use crate::beam_oracle::ElasticaSample;
use crate::error::{Result, VicError};
use crate::geometry::{FrameSample, Vec2};
use crate::image::{save_gray_png, Raster};
use crate::init::Polyline;

#[derive(Serialize)]
struct LineRow {
    s: f64,
    x1: f64,
    x2: f64,
    theta: f64,
    gamma: f64,
}

#[derive(Serialize)]
struct PolylineRow {
    q: usize,
    s: f64,
    x1: f64,
    x2: f64,
    theta: f64,
}

#[derive(Serialize)]
struct ProfileRow {
    s: f64,
    phi_per_length: f64,
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => VicError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => VicError::InvalidParameter(format!("csv: {other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| VicError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_mean_line_csv(path: impl AsRef<Path>, frames: &[FrameSample]) -> Result<()> {
    write_rows(
        path.as_ref(),
        frames.iter().map(|f| LineRow {
            s: f.s,
            x1: f.x.x,
            x2: f.x.y,
            theta: f.theta,
            gamma: f.gamma,
        }),
    )
}

pub fn write_elastica_csv(path: impl AsRef<Path>, shape: &[ElasticaSample]) -> Result<()> {
    write_rows(
        path.as_ref(),
        shape.iter().map(|e| LineRow {
            s: e.s,
            x1: e.x1,
            x2: e.x2,
            theta: e.theta,
            gamma: e.gamma,
        }),
    )
}

/// One row per segment start, plus the final end point with the last angle.
pub fn write_polyline_csv(path: impl AsRef<Path>, poly: &Polyline) -> Result<()> {
    let last = poly.angles.last().copied().unwrap_or(f64::NAN);
    write_rows(
        path.as_ref(),
        poly.points.iter().enumerate().map(|(q, x)| PolylineRow {
            q,
            s: q as f64 * poly.segment_length,
            x1: x.x,
            x2: x.y,
            theta: poly.angles.get(q).copied().unwrap_or(last),
        }),
    )
}

pub fn write_profile_csv(path: impl AsRef<Path>, profile: &[(f64, f64)]) -> Result<()> {
    write_rows(
        path.as_ref(),
        profile.iter().map(|&(s, phi_per_length)| ProfileRow { s, phi_per_length }),
    )
}

/// Saves the image dimmed to 60% with `curve` drawn in white.
pub fn save_overlay_png(path: impl AsRef<Path>, raster: &Raster, curve: &[Vec2]) -> Result<()> {
    let (w, h) = (raster.width(), raster.height());
    let mut values: Vec<f64> = raster.data().iter().map(|v| 0.6 * v).collect();
    for pair in curve.windows(2) {
        let steps = ((pair[1] - pair[0]).norm() * 4.0).ceil().max(1.0) as usize;
        for k in 0..=steps {
            let x = pair[0] + (pair[1] - pair[0]) * (k as f64 / steps as f64);
            let (c, r) = (x.x.round(), x.y.round());
            if c >= 0.0 && r >= 0.0 && (c as usize) < w && (r as usize) < h {
                values[r as usize * w + c as usize] = 1.0;
            }
        }
    }
    save_gray_png(path.as_ref(), w, h, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::CurvatureBasis;
    use crate::geometry::{mean_line, ShapeParams};

    #[test]
    fn mean_line_csv_has_schema_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("line.csv");
        let b = CurvatureBasis::legendre(1).unwrap();
        let p = ShapeParams::new(Vec2::new(1.0, 2.0), 0.1, vec![0.01, 0.0], 10.0);
        let frames = mean_line(&p, &b, 11).unwrap();
        write_mean_line_csv(&path, &frames).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("s,x1,x2,theta,gamma"));
        assert_eq!(lines.count(), 11);
        assert!(text.contains("\n0.0,1.0,2.0,0.1,"));
    }

    #[test]
    fn overlay_marks_curve() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.png");
        let r = Raster::constant(20, 10, 0.5).unwrap();
        save_overlay_png(&path, &r, &[Vec2::new(2.0, 5.0), Vec2::new(17.0, 5.0)]).unwrap();
        let back = Raster::load(&path, crate::image::Polarity::Bright).unwrap();
        assert_eq!(back.pixel(10, 5), 1.0);
        assert_eq!(back.pixel(10, 2), 0.0);
    }
}
