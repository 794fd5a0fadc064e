use std::collections::VecDeque;

use nalgebra::DVector;

use super::config::SolveConfig;
use super::driver::Driver;
use super::function::{Counted, SmoothFunction};
use super::line_search::strong_wolfe;
use super::report::SolveReport;
use crate::error::Result;

struct Pair {
    s: DVector<f64>,
    y: DVector<f64>,
    rho: f64,
}

/// Two-loop recursion: returns `-H g` for the implicit inverse Hessian `H`.
fn direction(pairs: &VecDeque<Pair>, g: &DVector<f64>) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(pairs.len());
    for p in pairs.iter().rev() {
        let a = p.rho * p.s.dot(&q);
        q.axpy(-a, &p.y, 1.0);
        alphas.push(a);
    }
    if let Some(last) = pairs.back() {
        q *= last.s.dot(&last.y) / last.y.norm_squared();
    }
    for (p, a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = p.rho * p.y.dot(&q);
        q.axpy(a - b, &p.s, 1.0);
    }
    -q
}

/// Limited-memory BFGS with a strong Wolfe line search.
///
/// Curvature pairs with `s^T y <= 1e-10 |s| |y|` are skipped. If a search
/// along the quasi-Newton direction fails, the memory is cleared and the
/// search is retried along `-g` before stagnation is declared.
pub fn minimize_lbfgs<F: SmoothFunction>(func: F, x0: &DVector<f64>, cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let f = Counted::new(func);
    let mut drv = Driver::new(cfg);
    let mut x = x0.clone();
    let (mut fx, mut g) = f.value_and_gradient(&x)?;
    let mut pairs: VecDeque<Pair> = VecDeque::with_capacity(cfg.memory);

    loop {
        let gn = g.norm();
        if !fx.is_finite() || !gn.is_finite() {
            return Err(drv.stagnation(&f, x, fx, gn, "objective or gradient is not finite"));
        }
        if let Some(term) = drv.stop(gn) {
            return Ok(drv.report(&f, x, fx, gn, term));
        }

        let mut step = None;
        let mut failure = None;
        for attempt in 0..2 {
            let mut d = direction(&pairs, &g);
            let mut slope = g.dot(&d);
            if attempt == 1 || !(slope < 0.0) {
                pairs.clear();
                d = -&g;
                slope = -gn * gn;
            }
            let alpha0 = if pairs.is_empty() { (1.0 / gn).min(1.0) } else { 1.0 };
            match strong_wolfe(&f, &x, fx, slope, &d, alpha0, cfg.c1, cfg.c2)? {
                Ok(s) => {
                    step = Some((s, d));
                    break;
                }
                Err(fail) => {
                    let retry = !pairs.is_empty();
                    failure = Some((fail, d));
                    if !retry {
                        break;
                    }
                    pairs.clear();
                }
            }
        }
        let Some((ws, d)) = step else {
            let (fail, d) = failure.expect("a failed search leaves its reason");
            return Err(fail.into_stagnation(drv, &f, &x, &d, fx, &g));
        };

        let s = d * ws.alpha;
        let y = &ws.grad - &g;
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back(Pair {
                rho: 1.0 / sy,
                s: s.clone(),
                y,
            });
        }
        x += s;
        fx = ws.fval;
        g = ws.grad;
        drv.record(fx, g.norm());
    }
}
