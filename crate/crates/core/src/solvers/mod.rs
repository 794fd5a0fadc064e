//! Unconstrained minimizers driven only by value, gradient and Hessian-vector
//! contracts.
//!
//! Every solver returns a [`SolveReport`] when it converges or exhausts its
//! iteration or time budget, and [`crate::Error::Stagnation`] (carrying the
//! best point) when it cannot make progress.

mod cg;
mod config;
mod crm;
mod cubic;
mod driver;
mod function;
mod lbfgs;
mod line_search;
mod report;
mod trust_region;

pub use cg::minimize_cg;
pub use config::{CrmConfig, SolveConfig};
pub use crm::{minimize_crm, minimize_crm_traced, momentum_weight, CrmReport, CrmStep};
pub use cubic::{cubic_subproblem, CubicStep, MAX_LANCZOS};
pub use function::{FnFunction, SmoothFunction};
pub use lbfgs::minimize_lbfgs;
pub use line_search::{line_search_wolfe, WolfeStep};
pub use report::{IterRecord, SolveReport, Termination};
pub use trust_region::minimize_tr_newton_cg;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use nalgebra::DVector;

/// Solver selector used by the CLI and the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Lbfgs,
    Cg,
    Trncg,
    Crm,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [SolverKind::Lbfgs, SolverKind::Cg, SolverKind::Trncg, SolverKind::Crm];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Lbfgs => "lbfgs",
            SolverKind::Cg => "cg",
            SolverKind::Trncg => "trncg",
            SolverKind::Crm => "crm",
        }
    }

    pub fn from_name(name: &str) -> Option<SolverKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Whether the solver needs Hessian-vector products.
    pub fn second_order(self) -> bool {
        matches!(self, SolverKind::Trncg | SolverKind::Crm)
    }

    pub fn minimize<F: SmoothFunction>(self, func: F, x0: &DVector<f64>, cfg: &SolveConfig) -> Result<SolveReport> {
        match self {
            SolverKind::Lbfgs => minimize_lbfgs(func, x0, cfg),
            SolverKind::Cg => minimize_cg(func, x0, cfg),
            SolverKind::Trncg => minimize_tr_newton_cg(func, x0, cfg),
            SolverKind::Crm => minimize_crm(func, x0, cfg, &CrmConfig::default()),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
