//! Command errors, their exit codes and their JSON form.

use serde::Serialize;
use vic_core::{FitFailure, FitReport, VicError};

pub const EXIT_IO: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] VicError),

    #[error("fit failed: {}", .0.error)]
    Fit(Box<FitFailure>),

    #[error("strip asymmetry {value:.5} exceeds the bound {bound}")]
    AsymmetryBound { value: f64, bound: f64 },
}

impl From<FitFailure> for CliError {
    fn from(f: FitFailure) -> Self {
        CliError::Fit(Box::new(f))
    }
}

/// Variant name of a core error, used as the `error` field of the JSON.
pub fn kind(e: &VicError) -> &'static str {
    match e {
        VicError::OrderTooHigh { .. } => "OrderTooHigh",
        VicError::BasisIndex { .. } => "BasisIndex",
        VicError::Domain { .. } => "Domain",
        VicError::MeshTooLarge { .. } => "MeshTooLarge",
        VicError::Io { .. } => "IoError",
        VicError::ImageFormat { .. } => "ImageFormat",
        VicError::DegenerateImage => "DegenerateImage",
        VicError::OutOfBounds { .. } => "OutOfBounds",
        VicError::Overlap { .. } => "Overlap",
        VicError::IllConditioned { .. } => "IllConditioned",
        VicError::NoDescent { .. } => "NoDescent",
        VicError::Seed { .. } => "SeedError",
        VicError::InitRank => "InitRank",
        VicError::OracleDivergence { .. } => "OracleDivergence",
        VicError::RenderBounds { .. } => "RenderBounds",
        VicError::InvalidParameter(_) => "InvalidParameter",
    }
}

fn core_exit_code(e: &VicError) -> i32 {
    match e {
        VicError::Io { .. } | VicError::ImageFormat { .. } => EXIT_IO,
        VicError::OrderTooHigh { .. }
        | VicError::BasisIndex { .. }
        | VicError::Domain { .. }
        | VicError::MeshTooLarge { .. }
        | VicError::InvalidParameter(_) => EXIT_CONFIG,
        _ => EXIT_NUMERIC,
    }
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a FitReport>,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => core_exit_code(e),
            CliError::Fit(f) => core_exit_code(&f.error),
            CliError::AsymmetryBound { .. } => EXIT_NUMERIC,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Core(e) => kind(e),
            CliError::Fit(f) => kind(&f.error),
            CliError::AsymmetryBound { .. } => "AsymmetryBound",
        }
    }

    /// One-line machine-readable description; failed fits carry the state
    /// they stopped in.
    pub fn to_json(&self) -> String {
        let report = match self {
            CliError::Fit(f) => Some(f.report.as_ref()),
            _ => None,
        };
        serde_json::to_string(&ErrorJson {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
            report,
        })
        .expect("error JSON is always serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let io = CliError::Core(VicError::Io {
            path: "x".into(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        });
        assert_eq!(io.exit_code(), 2);
        assert_eq!(io.kind(), "IoError");
        let order = CliError::Core(VicError::OrderTooHigh { order: 50, limit: 30 });
        assert_eq!(order.exit_code(), 3);
        assert_eq!(CliError::Config("x".into()).exit_code(), 3);
        assert_eq!(CliError::Core(VicError::InitRank).exit_code(), 4);
    }

    #[test]
    fn json_is_parseable() {
        let e = CliError::Core(VicError::OrderTooHigh { order: 50, limit: 30 });
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"], "OrderTooHigh");
        assert_eq!(v["exit_code"], 3);
        assert!(v.get("report").is_none());
    }
}
