//! Sphere and oblique manifold: every column of `X` has unit Euclidean norm.
//!
//! The operator acts column by column as `x -> 2x / (1 + |x|^2)`.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{as_matrix, flatten};

#[derive(Debug, Clone)]
pub(crate) struct ObliqueKernel {
    pub rows: usize,
    pub cols: usize,
}

impl ObliqueKernel {
    fn mat(&self, v: &DVector<f64>) -> DMatrix<f64> {
        as_matrix(v, self.rows, self.cols)
    }

    pub fn constraint(&self, x: &DVector<f64>) -> DVector<f64> {
        let x = self.mat(x);
        DVector::from_iterator(self.cols, x.column_iter().map(|c| c.norm_squared() - 1.0))
    }

    pub fn jac_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut x = self.mat(x);
        for (j, mut col) in x.column_iter_mut().enumerate() {
            col *= 2.0 * v[j];
        }
        flatten(x)
    }

    pub fn jac_adjoint(&self, x: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
        let (x, d) = (self.mat(x), self.mat(d));
        DVector::from_iterator(
            self.cols,
            x.column_iter().zip(d.column_iter()).map(|(xc, dc)| 2.0 * xc.dot(&dc)),
        )
    }

    pub fn jac_diff(&self, _x: &DVector<f64>, d: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        self.jac_apply(d, w)
    }

    pub fn operator(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut x = self.mat(x);
        for mut col in x.column_iter_mut() {
            let r = col.norm_squared();
            col *= 2.0 / (1.0 + r);
        }
        flatten(x)
    }

    /// The Jacobian of the columnwise map is symmetric, so the forward and
    /// adjoint actions coincide.
    pub fn operator_diff(&self, x: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
        let (x, d) = (self.mat(x), self.mat(d));
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            let xc = x.column(j);
            let dc = d.column(j);
            let q = 1.0 + xc.norm_squared();
            let col = dc * (2.0 / q) - xc * (4.0 * xc.dot(&dc) / (q * q));
            out.set_column(j, &col);
        }
        flatten(out)
    }

    pub fn operator_adjoint(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.operator_diff(x, v)
    }

    pub fn operator_adjoint_diff(&self, x: &DVector<f64>, d: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let (x, d, v) = (self.mat(x), self.mat(d), self.mat(v));
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            let (xc, dc, vc) = (x.column(j), d.column(j), v.column(j));
            let q = 1.0 + xc.norm_squared();
            let q2 = q * q;
            let (xd, xv, dv) = (xc.dot(&dc), xc.dot(&vc), dc.dot(&vc));
            let col =
                vc * (-4.0 * xd / q2) - dc * (4.0 * xv / q2) - xc * (4.0 * dv / q2) + xc * (16.0 * xv * xd / (q2 * q));
            out.set_column(j, &col);
        }
        flatten(out)
    }
}
