use nalgebra::DVector;

use super::config::SolveConfig;
use super::driver::Driver;
use super::function::{Counted, SmoothFunction};
use super::line_search::{strong_wolfe, WolfeStep};
use super::report::SolveReport;
use crate::error::Result;

/// Curvature constant used by CG regardless of `cfg.c2`: PR+ directions
/// need a tighter search than quasi-Newton ones to stay descent directions.
const CG_CURVATURE: f64 = 0.1;

/// Polak-Ribiere (PR+) nonlinear conjugate gradients.
///
/// The direction is reset to `-g` whenever it fails to be a descent direction
/// and whenever the PR+ coefficient is clipped to zero.
pub fn minimize_cg<F: SmoothFunction>(func: F, x0: &DVector<f64>, cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let f = Counted::new(func);
    let mut drv = Driver::new(cfg);
    let mut x = x0.clone();
    let (mut fx, mut g) = f.value_and_gradient(&x)?;
    let mut d = -&g;
    let mut prev_step: Option<(f64, f64)> = None;
    let c2 = CG_CURVATURE.max(2.0 * cfg.c1).min(cfg.c2);

    loop {
        let gn = g.norm();
        if !fx.is_finite() || !gn.is_finite() {
            return Err(drv.stagnation(&f, x, fx, gn, "objective or gradient is not finite"));
        }
        if let Some(term) = drv.stop(gn) {
            return Ok(drv.report(&f, x, fx, gn, term));
        }
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            d = -&g;
            slope = -gn * gn;
        }
        // Reuse the previous first-order change as the initial step guess.
        let alpha0 = match prev_step {
            Some((alpha, prev_slope)) => (alpha * prev_slope / slope).clamp(1e-10, 1e10),
            None => (1.0 / gn).min(1.0),
        };

        let found = if cfg.exact_line_search {
            exact_search(&f, &x, fx, slope, &d, alpha0)?
        } else {
            None
        };
        let step = match found {
            Some(s) => s,
            None => match strong_wolfe(&f, &x, fx, slope, &d, alpha0, cfg.c1, c2)? {
                Ok(s) => s,
                Err(fail) => return Err(fail.into_stagnation(drv, &f, &x, &d, fx, &g)),
            },
        };

        x.axpy(step.alpha, &d, 1.0);
        prev_step = Some((step.alpha, slope));
        let g_new = step.grad;
        let beta = (g_new.dot(&(&g_new - &g)) / (gn * gn)).max(0.0);
        d = &d * beta - &g_new;
        g = g_new;
        fx = step.fval;
        drv.record(fx, g.norm());
    }
}

/// Secant iteration on `phi'(t) = g(x + t d)^T d`. Returns `None` (so the
/// caller falls back to the Wolfe search) when the profile does not look
/// convex along `d` or the step would not decrease `f`.
fn exact_search<F: SmoothFunction>(
    f: &Counted<F>,
    x: &DVector<f64>,
    f0: f64,
    d0: f64,
    d: &DVector<f64>,
    alpha0: f64,
) -> Result<Option<WolfeStep>> {
    let (mut a_prev, mut s_prev) = (0.0, d0);
    let mut a = alpha0;
    for it in 0..50 {
        let (fv, g) = f.value_and_gradient(&(x + d * a))?;
        let s = g.dot(d);
        if !fv.is_finite() || !s.is_finite() {
            return Ok(None);
        }
        if s.abs() <= 1e-10 * d0.abs() {
            return Ok((fv <= f0).then_some(WolfeStep {
                alpha: a,
                fval: fv,
                grad: g,
                evaluations: it + 1,
            }));
        }
        let curv = (s - s_prev) / (a - a_prev);
        if !(curv > 0.0) {
            return Ok(None);
        }
        let next = a - s / curv;
        if !(next > 0.0) || !next.is_finite() {
            return Ok(None);
        }
        (a_prev, s_prev, a) = (a, s, next);
    }
    Ok(None)
}
