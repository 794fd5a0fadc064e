use nalgebra::DVector;

use super::config::SolveConfig;
use super::driver::Driver;
use super::function::{Counted, SmoothFunction};
use super::report::SolveReport;
use crate::error::{Error, Result};

/// Steps with `rho` above this are accepted.
const ACCEPT: f64 = 0.15;
const SHRINK_BELOW: f64 = 0.25;
const GROW_ABOVE: f64 = 0.75;

/// Positive `tau` with `|z + tau d| = radius`.
fn to_boundary(z: &DVector<f64>, d: &DVector<f64>, radius: f64) -> f64 {
    let a = d.norm_squared();
    let b = 2.0 * z.dot(d);
    let c = z.norm_squared() - radius * radius;
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    // Stable root of the quadratic; c <= 0 inside the region.
    if b >= 0.0 {
        -2.0 * c / (b + disc)
    } else {
        (disc - b) / (2.0 * a)
    }
}

/// Steihaug-Toint truncated CG on `min g^T p + 1/2 p^T H p` with `|p| <= radius`.
/// Returns `None` when CG breaks down on non-finite data.
fn steihaug<F: SmoothFunction>(
    f: &Counted<F>,
    x: &DVector<f64>,
    g: &DVector<f64>,
    radius: f64,
    tol: f64,
) -> Result<Option<DVector<f64>>> {
    let n = g.len();
    let mut z = DVector::zeros(n);
    let mut r = g.clone();
    let mut d = -&r;
    let mut rr = r.norm_squared();
    if rr.sqrt() <= tol {
        return Ok(Some(z));
    }
    for _ in 0..(2 * n).max(50) {
        let hd = f.hess_vec(x, &d)?;
        let curv = d.dot(&hd);
        if !curv.is_finite() {
            return Ok(None);
        }
        if curv <= 0.0 {
            let tau = to_boundary(&z, &d, radius);
            return Ok(Some(z + d * tau));
        }
        let alpha = rr / curv;
        let z_next = &z + &d * alpha;
        if z_next.norm() >= radius {
            let tau = to_boundary(&z, &d, radius);
            return Ok(Some(z + d * tau));
        }
        r.axpy(alpha, &hd, 1.0);
        let rr_next = r.norm_squared();
        z = z_next;
        if rr_next.sqrt() <= tol {
            break;
        }
        d = &d * (rr_next / rr) - &r;
        rr = rr_next;
    }
    Ok(Some(z))
}

/// Cauchy point of the trust-region model.
fn cauchy<F: SmoothFunction>(f: &Counted<F>, x: &DVector<f64>, g: &DVector<f64>, radius: f64) -> Result<DVector<f64>> {
    let gn = g.norm();
    let gbg = g.dot(&f.hess_vec(x, g)?);
    let tau = if gbg <= 0.0 || !gbg.is_finite() {
        1.0
    } else {
        (gn.powi(3) / (radius * gbg)).min(1.0)
    };
    Ok(g * (-tau * radius / gn))
}

/// Trust-region Newton method with a Steihaug-Toint CG inner solver.
///
/// The radius shrinks to a quarter of the step when `rho < 0.25` and doubles
/// (up to `tr_radius_max`) when `rho > 0.75` on a boundary step. If the inner
/// solver breaks down or produces no model decrease the Cauchy step is used.
pub fn minimize_tr_newton_cg<F: SmoothFunction>(func: F, x0: &DVector<f64>, cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if !func.has_hess_vec() {
        return Err(Error::Capability(
            "trust-region Newton-CG needs Hessian-vector products".into(),
        ));
    }
    let f = Counted::new(func);
    let mut drv = Driver::new(cfg);
    let mut x = x0.clone();
    let (mut fx, mut g) = f.value_and_gradient(&x)?;
    let mut radius = cfg.tr_radius_init;

    loop {
        let gn = g.norm();
        if !fx.is_finite() || !gn.is_finite() {
            return Err(drv.stagnation(&f, x, fx, gn, "objective or gradient is not finite"));
        }
        if let Some(term) = drv.stop(gn) {
            return Ok(drv.report(&f, x, fx, gn, term));
        }
        // Inexact Newton forcing term, tightened so that a full Newton step
        // on a quadratic already meets the outer tolerance.
        let tol = (gn * gn.sqrt().min(0.5)).min(0.5 * cfg.grad_tol);
        let mut p = match steihaug(&f, &x, &g, radius, tol)? {
            Some(p) => p,
            None => cauchy(&f, &x, &g, radius)?,
        };
        let mut hp = f.hess_vec(&x, &p)?;
        let mut pred = -(g.dot(&p) + 0.5 * p.dot(&hp));
        if !(pred > 0.0) {
            p = cauchy(&f, &x, &g, radius)?;
            hp = f.hess_vec(&x, &p)?;
            pred = -(g.dot(&p) + 0.5 * p.dot(&hp));
        }
        let pn = p.norm();
        let trial = &x + &p;
        let f_trial = f.value(&trial)?;
        let rho = if pred > 0.0 {
            (fx - f_trial) / pred
        } else {
            f64::NEG_INFINITY
        };
        let rho = if rho.is_nan() { f64::NEG_INFINITY } else { rho };

        if rho < SHRINK_BELOW {
            radius = 0.25 * pn.min(radius);
        } else if rho > GROW_ABOVE && pn >= 0.99 * radius {
            radius = (2.0 * radius).min(cfg.tr_radius_max);
        }
        if rho > ACCEPT && f_trial.is_finite() {
            x = trial;
            fx = f_trial;
            g = f.gradient(&x)?;
        }
        drv.record(fx, g.norm());
        if radius <= f64::EPSILON * (1.0 + x.norm()) {
            let gn = g.norm();
            return Err(drv.stagnation(&f, x, fx, gn, "trust-region radius collapsed"));
        }
    }
}
