use std::path::PathBuf;

/// Errors raised across the correlation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum VicError {
    #[error("basis order {order} exceeds the supported limit {limit}")]
    OrderTooHigh { order: usize, limit: usize },

    #[error("basis index {index} outside 0..={order}")]
    BasisIndex { index: usize, order: usize },

    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },

    #[error("virtual beam mesh of {nodes} nodes exceeds the limit")]
    MeshTooLarge { nodes: u64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {path}: {message}")]
    ImageFormat { path: PathBuf, message: String },

    #[error("image has constant luminance")]
    DegenerateImage,

    #[error("sample at ({x:.3}, {y:.3}) needs pixels outside the image")]
    OutOfBounds { x: f64, y: f64 },

    #[error("curvature overlap at s = {s:.3}: |gamma| * R = {gamma_r:.4} >= 1")]
    Overlap { s: f64, gamma_r: f64 },

    #[error("normal matrix ill-conditioned (estimate {condition:.3e}) at series order {order}")]
    IllConditioned { condition: f64, order: usize },

    #[error("no descent after {halvings} step halvings at iteration {iteration}")]
    NoDescent { iteration: usize, halvings: usize },

    #[error("seed does not lie on a fiber (segment phi {phi:.4} vs background {background:.4})")]
    Seed { phi: f64, background: f64 },

    #[error("initialization system is rank deficient")]
    InitRank,

    #[error("elastica fixed point did not converge in {iterations} iterations")]
    OracleDivergence { iterations: usize },

    #[error("curve leaves the render margin at ({x:.2}, {y:.2})")]
    RenderBounds { x: f64, y: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = VicError> = std::result::Result<T, E>;
