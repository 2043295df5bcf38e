use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("2L/dp = {ratio} is not an integer (L = {half_width}, dp = {dp})")]
    GridNotIntegral { half_width: f64, dp: f64, ratio: f64 },

    #[error("p = {p} lies outside [-{half_width}, {half_width}]")]
    OutOfDomain { p: f64, half_width: f64 },

    #[error("recovery window [{p_star}, {p_right}) holds {points} grid points, need at least 2")]
    EmptyWindow { p_star: f64, p_right: f64, points: usize },

    #[error("state is identically zero")]
    ZeroState,

    #[error("Hermitian eigensolver did not converge")]
    EigenFailure,

    #[error("noise matrices do not commute (commutator Frobenius norm {norm:e})")]
    NonCommuting { norm: f64 },

    #[error("unsupported problem: {0}")]
    Unsupported(String),

    #[error("malformed noise dump: {0}")]
    NoiseFormat(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
