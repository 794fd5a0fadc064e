use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::manifolds::ManifoldSpec;

/// Outcome of [`post_process_traced`].
#[derive(Debug, Clone)]
pub struct Restoration {
    pub x: DVector<f64>,
    /// Number of operator applications.
    pub iterations: usize,
    /// `|c|` before the first and after every application.
    pub trace: Vec<f64>,
}

/// Applies the operator until `|c(x)| <= eps_f`; returns the point and the
/// number of applications.
pub fn post_process(spec: &ManifoldSpec, x: &DVector<f64>, eps_f: f64, k_max: usize) -> Result<(DVector<f64>, usize)> {
    post_process_traced(spec, x, eps_f, k_max).map(|r| (r.x, r.iterations))
}

/// [`post_process`] with the residual trace.
///
/// Two consecutive increases of `|c|` (or a non-finite residual) raise
/// [`Error::Divergence`]; running out of applications raises
/// [`Error::NonConvergence`]. Both carry the trace.
pub fn post_process_traced(spec: &ManifoldSpec, x: &DVector<f64>, eps_f: f64, k_max: usize) -> Result<Restoration> {
    if !(eps_f > 0.0) {
        return Err(Error::Argument("feasibility tolerance must be positive".into()));
    }
    let mut x = x.clone();
    let mut r = spec.feasibility(&x)?;
    let mut trace = vec![r];
    let mut increases = 0;
    let mut iterations = 0;
    while r > eps_f {
        if iterations == k_max {
            return Err(Error::NonConvergence { trace });
        }
        x = spec.operator_apply(&x)?;
        iterations += 1;
        let next = spec.feasibility(&x)?;
        trace.push(next);
        if !next.is_finite() {
            return Err(Error::Divergence { trace });
        }
        increases = if next > r { increases + 1 } else { 0 };
        if increases == 2 {
            return Err(Error::Divergence { trace });
        }
        r = next;
    }
    Ok(Restoration { x, iterations, trace })
}
