//! Grayscale rasters: ingestion, normalization, and Catmull-Rom sampling.
//!
//! Pixel centers sit at integer coordinates `(col, row)`; there is no
//! half-pixel offset.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::{DynamicImage, GrayImage, ImageBuffer, ImageReader, Luma};
use serde::{Deserialize, Serialize};

use crate::basis::CurvatureBasis;
use crate::error::{Result, VicError};
use crate::exec::Exec;
use crate::geometry::{surface_point, BasisTable, FrameSample, MeanLine, ShapeParams, Vec2};
use crate::virtual_beam::VirtualBeam;

/// Which way the fiber contrasts with the background. Internally the fiber
/// is always bright; dark fibers are inverted on load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    #[default]
    #[serde(alias = "fiber-bright")]
    Bright,
    #[serde(alias = "fiber-dark")]
    Dark,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Bright => "bright",
            Polarity::Dark => "dark",
        })
    }
}

impl FromStr for Polarity {
    type Err = VicError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bright" | "fiber-bright" => Ok(Polarity::Bright),
            "dark" | "fiber-dark" => Ok(Polarity::Dark),
            other => Err(VicError::InvalidParameter(format!(
                "unknown polarity `{other}` (expected bright or dark)"
            ))),
        }
    }
}

/// What to do when the bicubic support leaves the image.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Fail with [`VicError::OutOfBounds`].
    #[default]
    Abort,
    /// Replicate edge pixels.
    Clamp,
}

/// Immutable luminance field `f`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    /// Min-max normalizes raw values to `[0, 1]`, inverting them for dark
    /// fibers.
    pub fn from_raw(width: usize, height: usize, raw: &[f64], polarity: Polarity) -> Result<Self> {
        if raw.len() != width * height || width == 0 || height == 0 {
            return Err(VicError::InvalidParameter(format!(
                "{} values for a {width}x{height} raster",
                raw.len()
            )));
        }
        let (lo, hi) = raw
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(VicError::DegenerateImage);
        }
        let span = hi - lo;
        let data = raw
            .iter()
            .map(|&v| {
                let f = (v - lo) / span;
                match polarity {
                    Polarity::Bright => f,
                    Polarity::Dark => 1.0 - f,
                }
            })
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Wraps values already expressed on the unit scale, without
    /// renormalizing. Values must lie in `[0, 1]`.
    pub fn from_unit_values(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height || width == 0 || height == 0 {
            return Err(VicError::InvalidParameter(format!(
                "{} values for a {width}x{height} raster",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(VicError::Domain {
                what: "unit luminance",
                value: *v,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// A constant image; mostly useful for tests and background estimates.
    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_unit_values(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Shifts the content by an integer offset, filling uncovered pixels
    /// with `fill`.
    pub fn translated(&self, dx: isize, dy: isize, fill: f64) -> Self {
        let mut data = vec![fill; self.data.len()];
        for row in 0..self.height {
            let src_row = row as isize - dy;
            if src_row < 0 || src_row >= self.height as isize {
                continue;
            }
            for col in 0..self.width {
                let src_col = col as isize - dx;
                if src_col < 0 || src_col >= self.width as isize {
                    continue;
                }
                data[row * self.width + col] = self.pixel(src_col as usize, src_row as usize);
            }
        }
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Median and MAD-based standard deviation of the luminance.
    pub fn robust_level(&self) -> (f64, f64) {
        let mut v = self.data.clone();
        let med = median_in_place(&mut v);
        for x in v.iter_mut() {
            *x = (*x - med).abs();
        }
        let mad = median_in_place(&mut v);
        (med, 1.4826 * mad)
    }

    /// Catmull-Rom value at `p`, aborting outside the bicubic support.
    pub fn sample(&self, p: Vec2) -> Result<f64> {
        self.sample_with(p, Boundary::Abort)
    }

    pub fn sample_with(&self, p: Vec2, boundary: Boundary) -> Result<f64> {
        let (cols, rows, wx, wy) = self.support(p, boundary)?;
        let mut acc = 0.0;
        for (b, &row) in rows.iter().enumerate() {
            let base = row * self.width;
            let mut line = 0.0;
            for (a, &col) in cols.iter().enumerate() {
                line += wx[a] * self.data[base + col];
            }
            acc += wy[b] * line;
        }
        Ok(acc)
    }

    /// Value and gradient of the Catmull-Rom interpolant at `p`.
    pub fn sample_with_gradient(&self, p: Vec2, boundary: Boundary) -> Result<(f64, Vec2)> {
        let (cols, rows, wx, wy) = self.support(p, boundary)?;
        let tx = p.x - p.x.floor();
        let ty = p.y - p.y.floor();
        let dx = catmull_rom_derivative(tx);
        let dy = catmull_rom_derivative(ty);
        let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
        for (b, &row) in rows.iter().enumerate() {
            let base = row * self.width;
            let (mut line, mut dline) = (0.0, 0.0);
            for (a, &col) in cols.iter().enumerate() {
                let f = self.data[base + col];
                line += wx[a] * f;
                dline += dx[a] * f;
            }
            v += wy[b] * line;
            gx += wy[b] * dline;
            gy += dy[b] * line;
        }
        Ok((v, Vec2::new(gx, gy)))
    }

    #[allow(clippy::type_complexity)]
    fn support(&self, p: Vec2, boundary: Boundary) -> Result<([usize; 4], [usize; 4], [f64; 4], [f64; 4])> {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(VicError::OutOfBounds { x: p.x, y: p.y });
        }
        let fx = p.x.floor();
        let fy = p.y.floor();
        let (ix, iy) = (fx as i64, fy as i64);
        let (w, h) = (self.width as i64, self.height as i64);
        let inside = ix >= 1 && iy >= 1 && ix + 2 < w && iy + 2 < h;
        let (cols, rows) = match (inside, boundary) {
            (true, _) => (
                [0, 1, 2, 3].map(|d| (ix - 1 + d) as usize),
                [0, 1, 2, 3].map(|d| (iy - 1 + d) as usize),
            ),
            (false, Boundary::Abort) => return Err(VicError::OutOfBounds { x: p.x, y: p.y }),
            (false, Boundary::Clamp) => (
                [0, 1, 2, 3].map(|d| (ix - 1 + d).clamp(0, w - 1) as usize),
                [0, 1, 2, 3].map(|d| (iy - 1 + d).clamp(0, h - 1) as usize),
            ),
        };
        Ok((cols, rows, catmull_rom(p.x - fx), catmull_rom(p.y - fy)))
    }

    /// Loads an 8/16-bit grayscale (or color, reduced by Rec. 709 luma)
    /// PNG or PGM file.
    pub fn load(path: impl AsRef<Path>, polarity: Polarity) -> Result<Self> {
        let path = path.as_ref();
        let reader = ImageReader::open(path).map_err(|source| VicError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let reader = reader.with_guessed_format().map_err(|source| VicError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let img = reader.decode().map_err(|e| VicError::ImageFormat {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let raw: Vec<f64> = match &img {
            DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLumaA16(_) => img.to_luma32f().into_raw().into_iter().map(f64::from).collect(),
            _ => img
                .to_rgb32f()
                .pixels()
                .map(|p| 0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64)
                .collect(),
        };
        Self::from_raw(w, h, &raw, polarity)
    }

    /// Writes the raster as an 8-bit grayscale PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        save_gray_png(path.as_ref(), self.width, self.height, &self.data)
    }

    /// Writes the raster as a 16-bit grayscale PNG.
    pub fn save_png16(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let img = ImageBuffer::<Luma<u16>, Vec<u16>>::from_fn(self.width as u32, self.height as u32, |c, r| {
            let v = self.data[r as usize * self.width + c as usize];
            Luma([(v.clamp(0.0, 1.0) * 65535.0).round() as u16])
        });
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| image_error(path, e))
    }
}

pub(crate) fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub(crate) fn save_gray_png(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    let img = GrayImage::from_fn(width as u32, height as u32, |c, r| {
        Luma([to_u8(values[r as usize * width + c as usize])])
    });
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_error(path, e))
}

fn image_error(path: &Path, e: image::ImageError) -> VicError {
    match e {
        image::ImageError::IoError(source) => VicError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => VicError::ImageFormat {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[inline]
fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

#[inline]
fn catmull_rom_derivative(t: f64) -> [f64; 4] {
    let t2 = t * t;
    [
        0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
        0.5 * (9.0 * t2 - 10.0 * t),
        0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
        0.5 * (3.0 * t2 - 2.0 * t),
    ]
}

/// The physical image resampled in the `(s, r)` frame of the beam.
/// Columns run along `s`, rows along `r` from `-R` to `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strip {
    pub n_s: usize,
    pub n_r: usize,
    pub values: Vec<f64>,
}

impl Strip {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n_s + i]
    }

    /// RMS of `strip(s, r) - strip(s, -r)` over the whole mesh.
    pub fn asymmetry(&self) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.n_r {
            let jm = self.n_r - 1 - j;
            for i in 0..self.n_s {
                let d = self.get(i, j) - self.get(i, jm);
                acc += d * d;
            }
        }
        (acc / (self.n_s * self.n_r) as f64).sqrt()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        save_gray_png(path.as_ref(), self.n_s, self.n_r, &self.values)
    }
}

/// Unwrapped strip together with its mirror-asymmetry metric.
#[derive(Debug, Clone)]
pub struct Unwrapped {
    pub strip: Strip,
    pub asymmetry: f64,
}

/// Resamples `raster` along the mesh of `beam` placed at `p`.
pub fn unwrap(raster: &Raster, p: &ShapeParams, basis: &CurvatureBasis, beam: &VirtualBeam) -> Result<Unwrapped> {
    p.check(basis)?;
    let table = BasisTable::new(basis, beam.n_s)?;
    let line = MeanLine::compute(p, &table)?;
    unwrap_frames(raster, &line.frames, &beam.r_nodes(), Boundary::Abort, Exec::default())
}

/// Resamples `raster` on arbitrary frames (for instance a reference curve
/// that is not a series shape).
pub fn unwrap_frames(
    raster: &Raster,
    frames: &[FrameSample],
    r_nodes: &[f64],
    boundary: Boundary,
    exec: Exec,
) -> Result<Unwrapped> {
    let columns = exec.try_map(frames.len(), |i| {
        r_nodes
            .iter()
            .map(|&r| raster.sample_with(surface_point(&frames[i], r), boundary))
            .collect::<Result<Vec<f64>>>()
    })?;
    let (n_s, n_r) = (frames.len(), r_nodes.len());
    let mut values = vec![0.0; n_s * n_r];
    for (i, col) in columns.iter().enumerate() {
        for (j, v) in col.iter().enumerate() {
            values[j * n_s + i] = *v;
        }
    }
    let strip = Strip { n_s, n_r, values };
    let asymmetry = strip.asymmetry();
    Ok(Unwrapped { strip, asymmetry })
}
