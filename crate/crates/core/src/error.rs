use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gradient constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    #[error("quadrature did not reach the requested tolerance: {0}")]
    QuadratureFailure(String),

    #[error("region leaves the computational domain: {0}")]
    OutOfDomain(String),

    #[error("mollification is sub-resolution: kernel radius {radius} below grid spacing {spacing}")]
    SubResolution { radius: f64, spacing: f64 },

    #[error("projection did not converge after {sweeps} sweeps (worst cell norm {worst})")]
    ProjectionStalled { sweeps: usize, worst: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("extrapolation unreliable: {0}")]
    ExtrapolationUnreliable(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("malformed field file: {0}")]
    MalformedFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
