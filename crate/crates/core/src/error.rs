use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid array configuration: {0}")]
    InvalidConfig(String),

    #[error("angle {0}° outside the [0°, 180°] domain")]
    AngleDomain(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("eigendecomposition did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    EigenNoConvergence { sweeps: usize, residual: f64 },

    #[error("degenerate subspace: |E22| = {0:e}")]
    DegenerateSubspace(f64),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Name of the operation family that produced the error, used by the
    /// CLI when reporting numerical failures.
    pub fn origin(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) | Error::AngleDomain(_) => "array_model",
            Error::EigenNoConvergence { .. } => "esprit::sample_covariance",
            Error::DegenerateSubspace(_) => "esprit::tls_rotation",
            Error::DegenerateGeometry(_) | Error::Constraint(_) => "dm_beamformer",
            Error::TooFewSamples { .. } => "ml_density",
            Error::ShapeMismatch { .. } | Error::InvalidArgument(_) => "argument check",
            Error::Parse(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => "io",
        }
    }
}
