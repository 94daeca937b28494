use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not unitary (max residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("state is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("columns are not orthonormal (max residual {residual:.3e})")]
    NotOrthonormal { residual: f64 },

    #[error("not a probability distribution (sum {sum}, min {min})")]
    InvalidDistribution { sum: f64, min: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("amplification is impossible at zero success probability")]
    ZeroSuccessProbability,

    #[error("plan was built for success probability {planned} but the circuit has {actual}")]
    PlanMismatch { planned: f64, actual: f64 },

    #[error("no success within {0} attempts")]
    MaxAttemptsExceeded(usize),

    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
