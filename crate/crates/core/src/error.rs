use thiserror::Error;

/// Errors produced by the statistical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel arity mismatch: expected {expected} points, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("sample too small: n = {n} but kernel arity is {m}")]
    SampleTooSmall { n: usize, m: usize },

    #[error("invalid trim levels: require 0 < alpha < beta < 1, got alpha = {alpha}, beta = {beta}")]
    InvalidTrim { alpha: String, beta: String },

    #[error("degenerate trim: N_beta - N_alpha = 0 (N = {n_values}, N_alpha = N_beta = {n_alpha})")]
    DegenerateTrim { n_values: usize, n_alpha: usize },

    #[error("quantile level {0} outside [0, 1]")]
    QuantileLevel(f64),

    #[error("no analytic kernel distribution for ({model}, {kernel}) and no calibration spec given")]
    MissingCalibration { model: String, kernel: String },

    #[error("covariance matrix is indefinite: diagonal residual {residual:.3e} below -{tolerance:.3e}")]
    IndefiniteCovariance { residual: f64, tolerance: f64 },

    #[error("covariance matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:.3e}")]
    AsymmetricCovariance { i: usize, j: usize, diff: f64 },

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
