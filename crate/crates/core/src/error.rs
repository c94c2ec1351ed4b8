use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid with N = {grid_modes} cannot hold a field with N = {field_modes}")]
    GridTooSmall { grid_modes: usize, field_modes: usize },
    #[error("grid size M = {m} is below the minimum {min} required for N = {n}")]
    GridBelowDealiasing { n: usize, m: usize, min: usize },
    #[error("{0} requires a mean-zero field")]
    NotMeanZero(&'static str),
    #[error("{0} requires a real field")]
    NotReal(&'static str),
    #[error("non-finite coefficient at k = {0}")]
    NonFinite(i64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("solution blew up at t = {t}: |u_k| = {magnitude:e} at k = {k}")]
    Unstable { t: f64, k: i64, magnitude: f64 },
    #[error("L2 norm drifted by {drift:e} (relative) by t = {t}; the step is too large for this horizon")]
    Drift { t: f64, drift: f64 },
    #[error("time step {dt} violates the stability bound (score {score:.3} > {limit})")]
    StepTooLarge { dt: f64, score: f64, limit: f64 },
    #[error("frequencies must be nonzero: {0:?}")]
    ZeroFrequency(Vec<i64>),
    #[error("frequencies must sum to zero: {0:?}")]
    NonzeroSum([i64; 4]),
    #[error("integer overflow evaluating identity at {0:?}")]
    Overflow(Vec<i64>),
    #[error("trajectory spacing {sample_dt} does not divide quadrature step {quadrature_dt}")]
    CoarseSampling { quadrature_dt: f64, sample_dt: f64 },
    #[error("ladder needs at least {min} entries, got {got}")]
    LadderTooShort { min: usize, got: usize },
    #[error("growth fit: {0}")]
    Fit(String),
    #[error("config: unknown key `{0}`")]
    UnknownKey(String),
    #[error("config: invalid value for `{key}`: {reason}")]
    Constraint { key: String, reason: String },
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
