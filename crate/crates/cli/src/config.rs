//! Fit configuration file.
//!
//! All lengths are in pixels, `seed_angle_deg` is in degrees and every other
//! angle in radians. Command-line flags override the file field by field.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use vic_core::correlation::FitOptions;
use vic_core::{BasisFamily, GradientForm, ParamId, Polarity};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub schema_version: u32,
    #[serde(default = "default_basis")]
    pub basis: BasisFamily,
    /// Highest curvature mode `N`.
    pub order: usize,
    /// Virtual beam half-width `R`, px.
    pub half_width: f64,
    /// Beam mesh nodes per pixel.
    #[serde(default = "default_refine")]
    pub refine: f64,
    /// A point on the fiber where tracing starts, px.
    pub seed: [f64; 2],
    /// Rough fiber direction at the seed, degrees.
    #[serde(default)]
    pub seed_angle_deg: f64,
    /// Tracing segment length, px; defaults to `4 R`.
    #[serde(default)]
    pub segment_length: Option<f64>,
    /// Order of the series fitted to the traced polyline; defaults to `N`,
    /// capped by the number of segments.
    #[serde(default)]
    pub init_order: Option<usize>,
    /// Parameters kept at their initial value (`x0_1`, `x0_2`, `theta0`, `a<n>`).
    #[serde(default)]
    pub freeze: Vec<String>,
    #[serde(default)]
    pub polarity: Polarity,
    #[serde(default = "yes")]
    pub backtracking: bool,
    /// Run end detection after the first fit and refit to the detected length.
    #[serde(default)]
    pub detect_end: bool,
    /// Beam length, px; defaults to the traced length.
    #[serde(default)]
    pub length: Option<f64>,
    /// Extra length past the traced polyline searched by end detection, px;
    /// defaults to one segment.
    #[serde(default)]
    pub end_margin: Option<f64>,
    #[serde(default)]
    pub gradient: GradientForm,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_max_segments")]
    pub max_segments: usize,
}

fn default_basis() -> BasisFamily {
    BasisFamily::Legendre
}

fn default_refine() -> f64 {
    vic_core::virtual_beam::DEFAULT_REFINE
}

fn yes() -> bool {
    true
}

fn default_max_iters() -> usize {
    FitOptions::default().max_iters
}

fn default_rel_tol() -> f64 {
    FitOptions::default().rel_tol
}

fn default_max_segments() -> usize {
    10_000
}

/// Field overrides collected from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides(pub Map<String, Value>);

impl Overrides {
    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.0.insert(key.to_string(), value.into());
    }
}

impl FitConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_value(value, &Overrides::default())
    }

    /// Merges `overrides` into the (possibly absent) file contents.
    pub fn from_value(base: Value, overrides: &Overrides) -> Result<Self, CliError> {
        let mut map = match base {
            Value::Object(m) => m,
            Value::Null => {
                let mut m = Map::new();
                m.insert("schema_version".into(), SCHEMA_VERSION.into());
                m
            }
            _ => return Err(CliError::Config("configuration must be a JSON object".into())),
        };
        for (k, v) in &overrides.0 {
            map.insert(k.clone(), v.clone());
        }
        let cfg: FitConfig =
            serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let positive = [
            ("half_width", Some(self.half_width)),
            ("refine", Some(self.refine)),
            ("segment_length", self.segment_length),
            ("length", self.length),
            ("rel_tol", Some(self.rel_tol)),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(CliError::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(m) = self.end_margin {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(CliError::Config(format!("end_margin must be non-negative, got {m}")));
            }
        }
        self.frozen()?;
        Ok(())
    }

    pub fn frozen(&self) -> Result<Vec<ParamId>, CliError> {
        self.freeze
            .iter()
            .map(|s| s.parse().map_err(|e: vic_core::VicError| CliError::Config(e.to_string())))
            .collect()
    }

    pub fn segment_length(&self) -> f64 {
        self.segment_length.unwrap_or(4.0 * self.half_width)
    }

    pub fn seed_angle(&self) -> f64 {
        self.seed_angle_deg.to_radians()
    }

    pub fn fit_options(&self) -> Result<FitOptions, CliError> {
        Ok(FitOptions {
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            frozen: self.frozen()?,
            backtracking: self.backtracking,
            refine: self.refine,
            gradient: self.gradient,
            ..FitOptions::default()
        })
    }
}
