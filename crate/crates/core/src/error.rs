use crate::weighting::PortfolioWeights;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the toolkit. Data problems name the offending asset
/// or row so a bad input file can be fixed without a debugger.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("non-positive price {value} for asset {asset} at data row {row}")]
    NonPositivePrice { asset: String, row: usize, value: f64 },

    #[error("need at least {needed} {what}, got {got}")]
    TooFew { what: &'static str, needed: usize, got: usize },

    #[error("duplicate asset id {0}")]
    DuplicateAsset(String),

    #[error("asset {0} not found")]
    UnknownAsset(String),

    #[error("asset {0} has zero return variance over the window")]
    ZeroVariance(String),

    #[error("correlation {0} outside [-1, 1]")]
    CorrelationOutOfRange(f64),

    #[error("matrix is not symmetric at ({i}, {j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("range [{start}, {end}) out of bounds for length {len}")]
    RangeOutOfBounds { start: i64, end: i64, len: usize },

    #[error("node {0} is isolated: every incident edge weight is zero")]
    IsolatedNode(String),

    #[error(
        "optimizer stalled at KKT residual {residual:.3e} after {iterations} iterations"
    )]
    NoConvergence {
        residual: f64,
        iterations: usize,
        /// Best feasible iterate found before giving up.
        best: Box<PortfolioWeights>,
    },

    #[error("every frontier point has zero risk")]
    DegenerateFrontier,

    #[error("{0}")]
    Config(String),
}
