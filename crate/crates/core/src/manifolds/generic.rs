//! Operator built from the constraint map alone:
//!
//! ```text
//! A(x) = x - J_c(x) (J_c(x)^T J_c(x) + alpha |c(x)|^2 I)^{-1} c(x)
//! ```
//!
//! `H(a) b` below denotes the directional derivative of `x -> J_c(x) b` along
//! `a`, i.e. the Hessian of `b^T c` applied to `a`. It is symmetric in the
//! sense `<e, H(a) b> = <a, H(e) b>`, which the adjoint formula relies on.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::linalg::dense_columns;

/// User-supplied constraint `c: R^n -> R^p` with its Jacobian actions.
pub trait ConstraintMap: Send + Sync {
    /// Number of constraints `p`.
    fn dim(&self) -> usize;

    fn eval(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `J_c(x) v`, length `n`.
    fn jac_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    /// `J_c(x)^T d`, length `p`.
    fn jac_adjoint_apply(&self, x: &DVector<f64>, d: &DVector<f64>) -> DVector<f64>;

    /// Exact `(D J_c(x)[d]) w` if available; finite differences are used otherwise.
    fn jac_diff_apply(&self, _x: &DVector<f64>, _d: &DVector<f64>, _w: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// Draw a feasible point, if the caller knows how.
    fn sample_feasible(&self, _rng: &mut dyn RngCore) -> Option<DVector<f64>> {
        None
    }
}

pub const DEFAULT_ALPHA: f64 = 1.0;

/// `|x|^2 - 1` on `R^n`, for wrapping the sphere as a generic manifold.
#[derive(Debug, Clone, Copy)]
pub struct SphereConstraint {
    pub n: usize,
}

impl ConstraintMap for SphereConstraint {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, x.norm_squared() - 1.0)
    }
    fn jac_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        x * (2.0 * v[0])
    }
    fn jac_adjoint_apply(&self, x: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, 2.0 * x.dot(d))
    }
    fn jac_diff_apply(&self, _x: &DVector<f64>, d: &DVector<f64>, w: &DVector<f64>) -> Option<DVector<f64>> {
        Some(d * (2.0 * w[0]))
    }
    fn sample_feasible(&self, rng: &mut dyn RngCore) -> Option<DVector<f64>> {
        Some(super::gaussian_vector(rng, self.n).normalize())
    }
}

#[derive(Clone)]
pub(crate) struct GenericKernel {
    pub n: usize,
    pub alpha: f64,
    pub map: Arc<dyn ConstraintMap>,
}

impl fmt::Debug for GenericKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericKernel")
            .field("n", &self.n)
            .field("p", &self.map.dim())
            .field("alpha", &self.alpha)
            .finish()
    }
}

/// Central finite difference of `g` along `d`, with step scaled by `base * (1 + |x|)`.
pub(crate) fn central_diff<G>(x: &DVector<f64>, d: &DVector<f64>, base: f64, g: G) -> DVector<f64>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let dn = d.norm();
    if dn == 0.0 {
        return g(x) * 0.0;
    }
    let u = d / dn;
    let h = base * (1.0 + x.norm());
    let plus = g(&(x + &u * h));
    let minus = g(&(x - &u * h));
    (plus - minus) * (dn / (2.0 * h))
}

pub(crate) fn second_order_step() -> f64 {
    f64::EPSILON.cbrt()
}

/// Quantities shared by all operator evaluations at one point.
struct Solve {
    jac: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    c: DVector<f64>,
    alpha: f64,
    /// `G^{-1} c`
    y: DVector<f64>,
}

impl GenericKernel {
    pub fn constraint(&self, x: &DVector<f64>) -> DVector<f64> {
        self.map.eval(x)
    }

    pub fn jac_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.map.jac_apply(x, v)
    }

    pub fn jac_adjoint(&self, x: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
        self.map.jac_adjoint_apply(x, d)
    }

    pub fn jac_diff(&self, x: &DVector<f64>, d: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        if let Some(exact) = self.map.jac_diff_apply(x, d, w) {
            return exact;
        }
        central_diff(x, d, second_order_step(), |z| self.map.jac_apply(z, w))
    }

    fn solve(&self, x: &DVector<f64>) -> Result<Solve> {
        let p = self.map.dim();
        let c = self.map.eval(x);
        let jac = dense_columns(self.n, p, |e| self.map.jac_apply(x, e));
        let gram = jac.transpose() * &jac;
        let c2 = c.norm_squared();
        let mut alpha = self.alpha;
        for attempt in 0..2 {
            let g = &gram + DMatrix::identity(p, p) * (alpha * c2);
            if let Some(chol) = g.cholesky() {
                let y = chol.solve(&c);
                return Ok(Solve { jac, chol, c, alpha, y });
            }
            if attempt == 0 {
                alpha *= 2.0;
            }
        }
        Err(Error::Numerical(format!(
            "regularized Gram system is not positive definite (alpha = {alpha})"
        )))
    }

    pub fn operator(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.solve(x)?;
        Ok(x - &s.jac * &s.y)
    }

    pub fn operator_diff(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.solve(x)?;
        let p = self.map.dim();
        let jd = s.jac.transpose() * d;
        let hy = self.jac_diff(x, d, &s.y);
        // dG[d] y = H(d)^T J_c y + J_c^T H(d) y + 2 alpha (c^T J_c^T d) y
        let u = &s.jac * &s.y;
        let ht_u = DVector::from_iterator(
            p,
            (0..p).map(|i| {
                let mut e = DVector::zeros(p);
                e[i] = 1.0;
                u.dot(&self.jac_diff(x, d, &e))
            }),
        );
        let dgy = ht_u + s.jac.transpose() * &hy + &s.y * (2.0 * s.alpha * s.c.dot(&jd));
        let dy = s.chol.solve(&(jd - dgy));
        Ok(d - hy - &s.jac * dy)
    }

    /// `J_A v = v - H(v) y - J_c z + H(J_c y) z + H(J_c z) y + 2 alpha (y^T z) J_c c`
    /// with `z = G^{-1} J_c^T v`.
    pub fn operator_adjoint(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.solve(x)?;
        let z = s.chol.solve(&(s.jac.transpose() * v));
        let jy = &s.jac * &s.y;
        let jz = &s.jac * &z;
        let out = v - self.jac_diff(x, v, &s.y) - &jz
            + self.jac_diff(x, &jy, &z)
            + self.jac_diff(x, &jz, &s.y)
            + &s.jac * &s.c * (2.0 * s.alpha * s.y.dot(&z));
        Ok(out)
    }

    pub fn operator_adjoint_diff(&self, x: &DVector<f64>, d: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        // Fail early so the difference quotient never swallows a solve error.
        self.solve(x)?;
        let h = second_order_step();
        let dn = d.norm();
        if dn == 0.0 {
            return Ok(DVector::zeros(self.n));
        }
        let u = d / dn;
        let step = h * (1.0 + x.norm());
        let plus = self.operator_adjoint(&(x + &u * step), v)?;
        let minus = self.operator_adjoint(&(x - &u * step), v)?;
        Ok((plus - minus) * (dn / (2.0 * step)))
    }
}
