use thiserror::Error;

use crate::solvers::SolveReport;

/// Errors raised by the manifold, CDF, solver and problem layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("constraint Jacobian is rank deficient (smallest singular value {sigma_min:.3e})")]
    Degenerate { sigma_min: f64 },

    #[error("point is not feasible: |c(x)| = {residual:.3e} exceeds {tolerance:.3e}")]
    Infeasible { residual: f64, tolerance: f64 },

    #[error("capability unavailable: {0}")]
    Capability(String),

    #[error("repeated operator application diverged; residual trace {trace:?}")]
    Divergence { trace: Vec<f64> },

    #[error("feasibility restoration did not reach tolerance; residual trace {trace:?}")]
    NonConvergence { trace: Vec<f64> },

    #[error("solver stagnated: {reason}")]
    Stagnation { reason: String, report: Box<SolveReport> },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
