use thiserror::Error;

/// Errors produced by the simulation toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-supplied argument is inconsistent or out of range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The ODE integrator could not continue.
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// Density-matrix propagation failed or broke a monitored invariant.
    #[error("propagation failed at t = {t}: {reason}")]
    Propagation { t: f64, reason: String },

    /// The Krylov exponential did not reach the requested residual.
    #[error("Krylov exponential did not converge (residual {residual:e})")]
    KrylovConvergence { residual: f64 },

    /// Not enough data to fit a decay.
    #[error("fit failed: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
