use std::time::Duration;

use crate::error::{Error, Result};

/// Stopping rules and algorithm constants shared by every solver.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    /// Stop once `|grad| <= grad_tol`.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub max_time: Duration,
    /// Sufficient-decrease constant of the Wolfe conditions.
    pub c1: f64,
    /// Curvature constant of the Wolfe conditions.
    pub c2: f64,
    /// Number of L-BFGS correction pairs.
    pub memory: usize,
    pub tr_radius_init: f64,
    pub tr_radius_max: f64,
    /// CG only: replace the Wolfe search by a secant search on the
    /// directional derivative.
    pub exact_line_search: bool,
    /// Record `(fval, |grad|)` after every iteration.
    pub history: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            grad_tol: 1e-6,
            max_iter: 1000,
            max_time: Duration::from_secs(1200),
            c1: 1e-4,
            c2: 0.9,
            memory: 10,
            tr_radius_init: 1.0,
            tr_radius_max: 1e3,
            exact_line_search: false,
            history: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::Argument("grad_tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Argument("max_iter must be at least 1".into()));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::Argument("line-search constants need 0 < c1 < c2 < 1".into()));
        }
        if self.memory == 0 {
            return Err(Error::Argument("L-BFGS memory must be at least 1".into()));
        }
        if !(self.tr_radius_init > 0.0 && self.tr_radius_init <= self.tr_radius_max) {
            return Err(Error::Argument("need 0 < tr_radius_init <= tr_radius_max".into()));
        }
        Ok(())
    }
}

/// Parameters of the cubic regularization method with momentum.
#[derive(Debug, Clone)]
pub struct CrmConfig {
    /// Initial cubic weight.
    pub nu: f64,
    /// Momentum cap, in `(0, 1)`.
    pub rho: f64,
    /// Relative accuracy of the cubic subproblem, in `(0, 1)`.
    pub eta: f64,
    /// Adapt `nu` from the model agreement ratio; when false `nu` is only
    /// increased after a step that fails to decrease the objective.
    pub adaptive: bool,
}

impl Default for CrmConfig {
    fn default() -> Self {
        CrmConfig {
            nu: 1.0,
            rho: 0.5,
            eta: 0.1,
            adaptive: true,
        }
    }
}

impl CrmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Argument("cubic weight nu must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Argument("momentum cap rho must lie in (0, 1)".into()));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Argument("subproblem accuracy eta must lie in (0, 1)".into()));
        }
        Ok(())
    }
}
