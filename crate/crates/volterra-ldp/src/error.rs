use thiserror::Error;

/// Errors shared across the kernel, simulation, solver, and asymptotics layers.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: achieved error {achieved:.3e} exceeds tolerance {tolerance:.3e}")]
    Quadrature { achieved: f64, tolerance: f64 },

    #[error(
        "Cholesky factorization failed after {attempts} jitter attempts; minimum eigenvalue {min_eigenvalue:.3e}"
    )]
    Factorization { min_eigenvalue: f64, attempts: u32 },

    #[error("self-similarity gate refused: defect {defect:.3e} exceeds {tolerance:.3e}")]
    GateRefused { defect: f64, tolerance: f64 },

    #[error("eps {eps:.6e} is not below the moment-bound threshold {threshold:.6e}; no bound available there")]
    MomentRange { eps: f64, threshold: f64 },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("rate {rate:.3e} is numerically zero; the implied-volatility limit is undefined")]
    DegenerateRate { rate: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
