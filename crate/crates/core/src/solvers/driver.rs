use std::time::Instant;

use nalgebra::DVector;

use super::config::SolveConfig;
use super::function::{Counted, SmoothFunction};
use super::report::{IterRecord, SolveReport, Termination};
use crate::error::Error;

/// Iteration bookkeeping shared by the solvers: budgets, history and counters.
pub(crate) struct Driver<'c> {
    cfg: &'c SolveConfig,
    start: Instant,
    pub iterations: usize,
    history: Option<Vec<IterRecord>>,
}

impl<'c> Driver<'c> {
    pub fn new(cfg: &'c SolveConfig) -> Self {
        Driver {
            cfg,
            start: Instant::now(),
            iterations: 0,
            history: cfg.history.then(Vec::new),
        }
    }

    /// Termination reason at the current iterate, if any.
    pub fn stop(&self, grad_norm: f64) -> Option<Termination> {
        if grad_norm <= self.cfg.grad_tol {
            Some(Termination::Converged)
        } else if self.iterations >= self.cfg.max_iter {
            Some(Termination::MaxIterations)
        } else if self.start.elapsed() >= self.cfg.max_time {
            Some(Termination::MaxTime)
        } else {
            None
        }
    }

    /// Closes one iteration that ended at a point with the given values.
    pub fn record(&mut self, fval: f64, grad_norm: f64) {
        self.iterations += 1;
        if let Some(h) = self.history.as_mut() {
            h.push(IterRecord { fval, grad_norm });
        }
    }

    pub fn report<F: SmoothFunction>(
        self,
        f: &Counted<F>,
        x: DVector<f64>,
        fval: f64,
        grad_norm: f64,
        termination: Termination,
    ) -> SolveReport {
        SolveReport {
            x_final: x,
            fval,
            iterations: self.iterations,
            nfev: f.nfev.get(),
            ngev: f.ngev.get(),
            nhev: f.nhev.get(),
            grad_norm,
            wall_time: self.start.elapsed(),
            termination,
            history: self.history,
        }
    }

    /// Stagnation error carrying the best point found so far.
    pub fn stagnation<F: SmoothFunction>(
        self,
        f: &Counted<F>,
        x: DVector<f64>,
        fval: f64,
        grad_norm: f64,
        reason: impl Into<String>,
    ) -> Error {
        let report = self.report(f, x, fval, grad_norm, Termination::Stagnated);
        Error::Stagnation {
            reason: reason.into(),
            report: Box::new(report),
        }
    }
}
