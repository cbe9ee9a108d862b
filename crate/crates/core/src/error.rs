use thiserror::Error;

/// Errors raised by the numerical pipeline and the simulators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigenvalue iteration did not converge for index {index} after {iterations} sweeps")]
    EigenNoConvergence { index: usize, iterations: usize },

    #[error("rank deficient matrix: {0}")]
    RankDeficient(String),

    #[error("singular matrix (condition estimate {cond:e})")]
    Singular { cond: f64 },

    #[error("numerical consistency failure: {0}")]
    Inconsistent(String),

    #[error("CFL violation: dt = {dt:e} exceeds the stable bound {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenNoConvergence { .. }
                | Error::RankDeficient(_)
                | Error::Singular { .. }
                | Error::Inconsistent(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
