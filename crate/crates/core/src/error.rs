//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum FvarError {
    #[error("zero dispersion: sample has no variability")]
    ZeroDispersion,

    #[error("empty sample")]
    EmptySample,

    #[error("invalid support: lower bound {0} must be strictly below upper bound {1}")]
    InvalidSupport(f64, f64),

    #[error("grid must be strictly increasing with at least {min} points, got {got}")]
    InvalidGrid { min: usize, got: usize },

    #[error("observation {value} at row {row} lies outside the support [{lower}, {upper}]")]
    OutOfSupport {
        value: f64,
        row: usize,
        lower: f64,
        upper: f64,
    },

    #[error("period {period} has {got} observations, below the floor of {floor}")]
    TooFewObservations {
        period: String,
        got: usize,
        floor: usize,
    },

    #[error("cdf is not strictly increasing: corrupted density curve")]
    NonMonotoneCdf,

    #[error("LQD overflow: max |f| = {0:.3} exceeds the cap of 700")]
    LqdOverflow(f64),

    #[error("curve is not finite everywhere")]
    NonFiniteCurve,

    #[error("grid mismatch between curve and model")]
    GridMismatch,

    #[error("K = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("series {0} is effectively constant: AR(1) residual variance is not positive")]
    ConstantSeries(String),

    #[error("matrix {0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("no steady state: companion matrix spectral radius is {0:.6}")]
    NoSteadyState(f64),

    #[error("quantile level {0} must lie strictly inside (0, 1)")]
    BadQuantileLevel(f64),

    #[error("density has zero mean: Gini coefficient undefined")]
    ZeroMeanDensity,

    #[error("design matrix is rank deficient; collinear columns: {0}")]
    RankDeficient(String),

    #[error("lag truncation {truncation} must be below the sample size {t}")]
    BadLagTruncation { truncation: usize, t: usize },

    #[error("not enough observations: need at least {need}, have {have}")]
    NotEnoughObservations { need: usize, have: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FvarError>;
