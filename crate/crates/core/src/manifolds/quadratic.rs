//! Manifolds cut out by a quadratic matrix equation `X^T M X = T`.
//!
//! One kernel serves the Stiefel family (`M = B`, `T = I`), the symplectic
//! Stiefel manifold (`M = Q_m`, `T = Q_s`) and quadratic matrix Lie groups
//! (`M = R`, `T = R`). The residual `X^T M X - T` is symmetric or skew, so only
//! the matching triangle is kept as the constraint vector.
//!
//! Every operator in this family has the form
//!
//! ```text
//! A(X) = X (3/2 I - 1/2 L X^T W X N)
//! ```
//!
//! with small `s x s` factors `L`, `N` and an `m x m` weight `W`:
//!
//! | manifold             | W        | L       | N   |
//! |----------------------|----------|---------|-----|
//! | (generalized) Stiefel| B        | I       | I   |
//! | symplectic Stiefel   | Q_m      | Q_s^T   | I   |
//! | Lie group            | R        | R^T     | I   |

use nalgebra::{DMatrix, DVector};

use crate::linalg::{as_matrix, flatten, half_unvec, half_vec, Half, Structured};

#[derive(Debug, Clone)]
pub(crate) struct QuadraticKernel {
    pub rows: usize,
    pub cols: usize,
    /// Constraint weight `M`.
    pub weight: Structured,
    pub target: DMatrix<f64>,
    pub half: Half,
    /// Operator weight `W`.
    pub op_weight: Structured,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
}

impl QuadraticKernel {
    fn mat(&self, v: &DVector<f64>) -> DMatrix<f64> {
        as_matrix(v, self.rows, self.cols)
    }

    pub fn constraint(&self, x: &DVector<f64>) -> DVector<f64> {
        let x = self.mat(x);
        let r = x.transpose() * self.weight.mul(&x) - &self.target;
        half_vec(&r, self.half)
    }

    /// `J_c(X) v = M X W^T + M^T X W` where `W` places `v` in its triangle.
    pub fn jac_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let x = self.mat(x);
        self.jac_apply_mat(&x, v)
    }

    fn jac_apply_mat(&self, x: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
        let w = half_unvec(v, self.cols, self.half);
        let out = self.weight.mul(&(x * w.transpose())) + self.weight.transpose().mul(&(x * w));
        flatten(out)
    }

    pub fn jac_adjoint(&self, x: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
        let (x, d) = (self.mat(x), self.mat(d));
        let mx = self.weight.mul(&x);
        let md = self.weight.mul(&d);
        half_vec(&(d.transpose() * mx + x.transpose() * md), self.half)
    }

    /// `J_c` is linear in `X`, so its directional derivative is `J_c(D)`.
    pub fn jac_diff(&self, _x: &DVector<f64>, d: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let d = self.mat(d);
        self.jac_apply_mat(&d, w)
    }

    fn inner(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.left * x.transpose() * self.op_weight.mul(x) * &self.right
    }

    fn inner_diff(&self, x: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
        let e = d.transpose() * self.op_weight.mul(x) + x.transpose() * self.op_weight.mul(d);
        &self.left * e * &self.right
    }

    fn scaled(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.cols, self.cols) * 1.5 - p * 0.5
    }

    pub fn operator(&self, x: &DVector<f64>) -> DVector<f64> {
        let x = self.mat(x);
        let p = self.inner(&x);
        flatten(&x * self.scaled(&p))
    }

    pub fn operator_diff(&self, x: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
        let (x, d) = (self.mat(x), self.mat(d));
        let p = self.inner(&x);
        let out = &d * self.scaled(&p) - &x * self.inner_diff(&x, &d) * 0.5;
        flatten(out)
    }

    /// Adjoint of [`Self::operator_diff`]:
    /// `V (3/2 I - 1/2 P^T) - 1/2 (W X G^T + W^T X G)` with `G = L^T X^T V N^T`.
    pub fn operator_adjoint(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let (x, v) = (self.mat(x), self.mat(v));
        let p = self.inner(&x);
        let g = self.left.transpose() * x.transpose() * &v * self.right.transpose();
        let out = &v * self.scaled(&p.transpose())
            - (self.op_weight.mul(&(&x * g.transpose())) + self.op_weight.transpose().mul(&(&x * &g))) * 0.5;
        flatten(out)
    }

    pub fn operator_adjoint_diff(&self, x: &DVector<f64>, d: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let (x, d, v) = (self.mat(x), self.mat(d), self.mat(v));
        let dp = self.inner_diff(&x, &d);
        let lt = self.left.transpose();
        let rt = self.right.transpose();
        let g = &lt * x.transpose() * &v * &rt;
        let dg = &lt * d.transpose() * &v * &rt;
        let wt = self.op_weight.transpose();
        let sum = self.op_weight.mul(&(&d * g.transpose()))
            + self.op_weight.mul(&(&x * dg.transpose()))
            + wt.mul(&(&d * &g))
            + wt.mul(&(&x * &dg));
        flatten(-(&v * dp.transpose()) * 0.5 - sum * 0.5)
    }
}
