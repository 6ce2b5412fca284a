use thiserror::Error;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hurwitz (spectral abscissa {abscissa:e} >= 0)")]
    NotHurwitz { abscissa: f64 },

    #[error("linear system is numerically singular (pivot ratio {pivot_ratio:e})")]
    SingularSolve { pivot_ratio: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("decay rate mu={mu} must lie in (0, {limit})")]
    MuTooLarge { mu: f64, limit: f64 },

    #[error("risk-sensitivity theta={theta} outside [0, {theta_max})")]
    ThetaOutOfRange { theta: f64, theta_max: f64 },

    #[error("theta={theta} is supercritical (max eigenvalue of 2*theta*Phi = {peak})")]
    ThetaSupercritical { theta: f64, peak: f64 },

    #[error("quadrature did not reach tolerance {tol:e} (error estimate {estimate:e})")]
    QuadratureFailure { tol: f64, estimate: f64 },

    #[error("relative-entropy threshold must be nonnegative, got {0}")]
    NegativeEps(f64),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
