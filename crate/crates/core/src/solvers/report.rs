use std::time::Duration;

use nalgebra::DVector;
use serde::Serialize;

/// Why a solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `|grad| <= grad_tol`.
    Converged,
    MaxIterations,
    MaxTime,
    /// The method could not make further progress; see [`crate::Error::Stagnation`].
    Stagnated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub fval: f64,
    pub grad_norm: f64,
}

/// Outcome of an unconstrained solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x_final: DVector<f64>,
    pub fval: f64,
    pub iterations: usize,
    pub nfev: usize,
    pub ngev: usize,
    /// Hessian-vector products.
    pub nhev: usize,
    pub grad_norm: f64,
    pub wall_time: Duration,
    pub termination: Termination,
    /// One entry per iteration, when requested.
    pub history: Option<Vec<IterRecord>>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}
