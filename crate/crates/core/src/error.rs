use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time {t} is outside the horizon [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "covariance factorization failed for model `{model}` on a grid of {size} points (jitter reached {jitter:e})"
    )]
    Factorization { model: String, size: usize, jitter: f64 },

    #[error("partition time {0} is not a point of the path grid")]
    PartitionNotOnGrid(f64),

    #[error("paths do not share a grid")]
    GridMismatch,

    #[error("model `{0}` has no grid-free covariance kernel")]
    GridDependentKernel(String),

    #[error("sup of the variance is {0} > 1; rescale the model by 1/sqrt(V*) before evaluating bounds")]
    NeedsRescale(f64),

    #[error("map is not strictly monotone: {0}")]
    NotMonotone(String),

    #[error("level grid does not cover the path range [{min}, {max}]")]
    Coverage { min: f64, max: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("cannot parse payoff `{input}`: {reason}")]
    Parse { input: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
