use nalgebra::DVector;
use serde::Serialize;

use super::config::{CrmConfig, SolveConfig};
use super::cubic::cubic_subproblem;
use super::driver::Driver;
use super::function::{Counted, SmoothFunction};
use super::report::SolveReport;
use crate::error::{Error, Result};

const NU_MIN: f64 = 1e-8;
const NU_MAX: f64 = 1e16;
/// Agreement ratios below this reject the step and double `nu`.
const RATIO_REJECT: f64 = 0.1;
/// Agreement ratios above this halve `nu` for the next iteration.
const RATIO_RELAX: f64 = 0.9;

/// Momentum weight `tau = min(rho, |grad h(y)|, |y - x|)`.
pub fn momentum_weight(rho: f64, grad_norm_cubic: f64, step_norm: f64) -> f64 {
    rho.min(grad_norm_cubic).min(step_norm)
}

/// One accepted iteration of [`minimize_crm_traced`].
#[derive(Debug, Clone, Serialize)]
pub struct CrmStep {
    /// Value at the start of the iteration, `h(x_k)`.
    pub f_start: f64,
    /// `h(y_{k+1})` for the cubic step `y_{k+1} = x_k + d_k`.
    pub f_cubic: f64,
    /// `h(v_{k+1})` at the momentum point.
    pub f_momentum: f64,
    /// `h(x_{k+1})`.
    pub f_next: f64,
    pub tau: f64,
    /// `|grad h(y_{k+1})|`.
    pub grad_norm_cubic: f64,
    /// `|y_{k+1} - x_k|`.
    pub step_norm: f64,
    /// Agreement between the actual and the model decrease.
    pub ratio: f64,
    /// Cubic weight used for the accepted step.
    pub nu: f64,
    /// Whether the momentum point was taken.
    pub momentum_taken: bool,
    pub subproblem_inexact: bool,
    /// `x_k`.
    #[serde(skip)]
    pub x: DVector<f64>,
    /// `y_{k+1}`.
    #[serde(skip)]
    pub y: DVector<f64>,
}

/// A CRm solve with its per-iteration trace.
#[derive(Debug, Clone)]
pub struct CrmReport {
    pub report: SolveReport,
    pub steps: Vec<CrmStep>,
}

/// Cubic regularization with momentum; see [`minimize_crm_traced`].
pub fn minimize_crm<F: SmoothFunction>(
    func: F,
    x0: &DVector<f64>,
    cfg: &SolveConfig,
    crm: &CrmConfig,
) -> Result<SolveReport> {
    minimize_crm_traced(func, x0, cfg, crm).map(|r| r.report)
}

/// Cubic regularization with momentum.
///
/// Each iteration computes the cubic step `y = x + d`, the momentum point
/// `v = y + tau (y - y_prev)` with `tau = min(rho, |grad h(y)|, |y - x|)`,
/// and moves to whichever of `y`, `v` has the smaller value (`y` on ties).
/// `y_prev` starts at `x0`.
///
/// The cubic weight is adapted: a step with `h(y) > h(x)` or model agreement
/// ratio below 0.1 is recomputed with `nu` doubled; a ratio above 0.9 halves
/// `nu` for the next iteration. With `crm.adaptive = false` only the doubling
/// safeguard remains.
pub fn minimize_crm_traced<F: SmoothFunction>(
    func: F,
    x0: &DVector<f64>,
    cfg: &SolveConfig,
    crm: &CrmConfig,
) -> Result<CrmReport> {
    cfg.validate()?;
    crm.validate()?;
    if !func.has_hess_vec() {
        return Err(Error::Capability("CRm needs Hessian-vector products".into()));
    }
    let f = Counted::new(func);
    let mut drv = Driver::new(cfg);
    let mut steps = Vec::new();
    let mut x = x0.clone();
    let mut y_prev = x0.clone();
    let (mut fx, mut g) = f.value_and_gradient(&x)?;
    let mut nu = crm.nu;

    loop {
        let gn = g.norm();
        if !fx.is_finite() || !gn.is_finite() {
            return Err(drv.stagnation(&f, x, fx, gn, "objective or gradient is not finite"));
        }
        if let Some(term) = drv.stop(gn) {
            let report = drv.report(&f, x, fx, gn, term);
            return Ok(CrmReport { report, steps });
        }

        // Inner loop: increase nu until the cubic step is acceptable.
        let accepted = loop {
            let step = cubic_subproblem(&g, |d: &DVector<f64>| f.hess_vec(&x, d), nu, crm.eta)?;
            let predicted = -step.model_value(&g, nu);
            let y = &x + &step.d;
            let (fy, gy) = f.value_and_gradient(&y)?;
            let rho = if predicted > 0.0 {
                (fx - fy) / predicted
            } else {
                f64::NEG_INFINITY
            };
            let ok = fy.is_finite() && fy <= fx && (!crm.adaptive || rho >= RATIO_REJECT);
            if ok {
                break (step, y, fy, gy, rho);
            }
            nu *= 2.0;
            if nu > NU_MAX {
                return Err(drv.stagnation(&f, x, fx, gn, format!("cubic weight exceeded {NU_MAX:e}")));
            }
        };
        let (step, y, fy, gy, rho) = accepted;

        let grad_norm_cubic = gy.norm();
        let step_norm = (&y - &x).norm();
        let tau = momentum_weight(crm.rho, grad_norm_cubic, step_norm);
        let v = &y + (&y - &y_prev) * tau;
        let fv = f.value(&v)?;
        let momentum_taken = fv < fy;
        let (x_next, f_next, g_next) = if momentum_taken {
            let gv = f.gradient(&v)?;
            (v, fv, gv)
        } else {
            (y.clone(), fy, gy)
        };

        steps.push(CrmStep {
            f_start: fx,
            f_cubic: fy,
            f_momentum: fv,
            f_next,
            tau,
            grad_norm_cubic,
            step_norm,
            ratio: rho,
            nu,
            momentum_taken,
            subproblem_inexact: step.inexact,
            x: x.clone(),
            y: y.clone(),
        });
        if crm.adaptive && rho > RATIO_RELAX {
            nu = (0.5 * nu).max(NU_MIN);
        }
        y_prev = y;
        x = x_next;
        fx = f_next;
        g = g_next;
        drv.record(fx, g.norm());
    }
}
