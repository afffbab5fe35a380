use thiserror::Error;

/// Errors produced by state construction, symplectic operations, measurement
/// and protocol runs.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mode index {mode} out of range for a {n_modes}-mode state")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("covariance matrix asymmetry {max_asymmetry:.3e} exceeds tolerance {tolerance:.1e}")]
    AsymmetricCovariance { max_asymmetry: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "state violates the Heisenberg bound: smallest symplectic eigenvalue {nu_min} < 1"
    )]
    Unphysical { nu_min: f64 },

    #[error("degenerate measurement: quadrature variance {variance:.3e} below threshold")]
    DegenerateMeasurement { variance: f64 },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
