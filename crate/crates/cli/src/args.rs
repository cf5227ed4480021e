//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::config::Overrides;

#[derive(Debug, Parser)]
#[command(name = "vic", version, about = "Mean-line identification of slender objects by virtual image correlation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Identify the mean line of the fiber in an image.
    Fit {
        image: PathBuf,
        /// Output directory for report.json, mean_line.csv, polyline.csv,
        /// overlay.png and (with end detection) profile.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Render a synthetic image from a scene description.
    Synth {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the true mean line as CSV.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Write an 8-bit PNG instead of a 16-bit one.
        #[arg(long)]
        eight_bit: bool,
    },
    /// Solve the heavy cantilever elastica and write its shape as CSV.
    Oracle {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Convert to pixels at this scale.
        #[arg(long)]
        px_per_meter: Option<f64>,
        /// Pixel position of the clamp, `x,y` (with --px-per-meter).
        #[arg(long, value_parser = parse_pair, default_value = "0,0")]
        origin: [f64; 2],
    },
    /// Resample the image along a fitted beam into an (s, r) strip.
    Unwrap {
        image: PathBuf,
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fail with a numeric error when the asymmetry exceeds this value.
        #[arg(long)]
        max_asymmetry: Option<f64>,
    },
    /// Fit at increasing series orders, each started from the previous one.
    SweepOrder {
        image: PathBuf,
        #[arg(long)]
        min: usize,
        #[arg(long)]
        max: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
    },
}

/// Fit settings; each flag overrides the matching configuration field.
#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// legendre or fourier.
    #[arg(long)]
    pub basis: Option<String>,
    #[arg(long)]
    pub order: Option<usize>,
    /// Virtual beam half-width, px.
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Beam mesh nodes per pixel.
    #[arg(long)]
    pub refine: Option<f64>,
    /// Seed point on the fiber, `x,y` in px.
    #[arg(long, value_parser = parse_pair)]
    pub seed: Option<[f64; 2]>,
    /// Fiber direction at the seed, degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub seed_angle: Option<f64>,
    /// Tracing segment length, px.
    #[arg(long)]
    pub segment_length: Option<f64>,
    /// Keep a parameter fixed (repeatable); replaces the list of the file.
    #[arg(long)]
    pub freeze: Vec<String>,
    /// bright or dark.
    #[arg(long)]
    pub polarity: Option<String>,
    #[arg(long)]
    pub no_backtracking: bool,
    #[arg(long)]
    pub detect_end: bool,
    /// Beam length, px.
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub init_order: Option<usize>,
    /// exact or virtual-image.
    #[arg(long)]
    pub gradient: Option<String>,
}

impl FitArgs {
    pub fn overrides(&self) -> Overrides {
        let mut o = Overrides::default();
        if let Some(v) = &self.basis {
            o.set("basis", v.to_ascii_lowercase());
        }
        if let Some(v) = self.order {
            o.set("order", v);
        }
        if let Some(v) = self.half_width {
            o.set("half_width", v);
        }
        if let Some(v) = self.refine {
            o.set("refine", v);
        }
        if let Some(v) = self.seed {
            o.set("seed", v.to_vec());
        }
        if let Some(v) = self.seed_angle {
            o.set("seed_angle_deg", v);
        }
        if let Some(v) = self.segment_length {
            o.set("segment_length", v);
        }
        if !self.freeze.is_empty() {
            o.set("freeze", Value::from(self.freeze.clone()));
        }
        if let Some(v) = &self.polarity {
            o.set("polarity", v.to_ascii_lowercase());
        }
        if self.no_backtracking {
            o.set("backtracking", false);
        }
        if self.detect_end {
            o.set("detect_end", true);
        }
        if let Some(v) = self.length {
            o.set("length", v);
        }
        if let Some(v) = self.init_order {
            o.set("init_order", v);
        }
        if let Some(v) = &self.gradient {
            o.set("gradient", v.to_ascii_lowercase());
        }
        o
    }
}

pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok([parse(a)?, parse(b)?])
}
