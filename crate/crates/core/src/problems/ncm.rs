//! Weighted nearest low-rank correlation matrix.
//!
//! The factor `X` (`m x s`, unit rows) is stored transposed as `Y = X^T`
//! (`s x m`, unit columns) so that it lives on the column-normalized oblique
//! manifold. In that layout
//!
//! ```text
//! f(Y)       = 1/2 |H o (Y^T Y - G)|_F^2
//! grad f(Y)  = 2 Y R,                   R = H o H o (Y^T Y - G)
//! hess f[D]  = 2 D R + 2 Y (H o H o (D^T Y + Y^T D))
//! ```

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{stream, ProblemInstance, DATA_STREAM};
use crate::cdf::Objective;
use crate::error::{Error, Result};
use crate::linalg::{as_matrix, flatten};
use crate::manifolds::{gaussian_matrix, ManifoldSpec};

#[derive(Debug, Clone)]
pub struct NcmObjective {
    g: DMatrix<f64>,
    /// Elementwise square of the weights.
    h2: DMatrix<f64>,
    s: usize,
}

impl NcmObjective {
    /// `g` and `h` must be symmetric `m x m`.
    pub fn new(g: DMatrix<f64>, h: &DMatrix<f64>, s: usize) -> Result<Self> {
        if !g.is_square() || h.shape() != g.shape() {
            return Err(Error::Argument("G and H must be square of the same order".into()));
        }
        Ok(NcmObjective {
            h2: h.component_mul(h),
            g,
            s,
        })
    }

    fn factor(&self, x: &DVector<f64>) -> DMatrix<f64> {
        as_matrix(x, self.s, self.g.nrows())
    }

    /// `H o H o (Y^T Y - G)`.
    fn weighted_residual(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        (y.transpose() * y - &self.g).component_mul(&self.h2)
    }
}

impl Objective for NcmObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let y = self.factor(x);
        let e = y.transpose() * &y - &self.g;
        0.5 * e.component_mul(&e).component_mul(&self.h2).sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let y = self.factor(x);
        flatten(&y * self.weighted_residual(&y) * 2.0)
    }

    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let y = self.factor(x);
        let e = y.transpose() * &y - &self.g;
        let r = e.component_mul(&self.h2);
        (0.5 * r.component_mul(&e).sum(), flatten(&y * r * 2.0))
    }

    fn hess_vec(&self, x: &DVector<f64>, d: &DVector<f64>) -> Option<DVector<f64>> {
        let y = self.factor(x);
        let dm = self.factor(d);
        let r = self.weighted_residual(&y);
        let cross = (dm.transpose() * &y + y.transpose() * &dm).component_mul(&self.h2);
        Some(flatten((&dm * r + &y * cross) * 2.0))
    }

    fn has_hess_vec(&self) -> bool {
        true
    }
}

/// `D^-1/2 M D^-1/2` with `D = diag(M)`, giving a unit diagonal.
fn unit_diagonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.diagonal().map(|v| 1.0 / v.sqrt());
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[i] * d[j])
}

/// Symmetric weights with entries uniform on `[0, 1]`.
pub(crate) fn random_weights<R: Rng + ?Sized>(rng: &mut R, m: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(m, m);
    for j in 0..m {
        for i in 0..=j {
            let v: f64 = rng.random();
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Synthetic instance: `G = (1 - theta) G0 + theta E` where `G0` is the
/// unit-diagonal normalization of `L L^T` for Gaussian `L` with
/// `min(m, 2s)` columns, `E` is symmetric with unit diagonal and off-diagonal
/// entries uniform on `[-1, 1]`, and `H` is symmetric uniform on `[0, 1]`.
pub fn ncm_problem(m: usize, s: usize, theta: f64, seed: u64) -> Result<ProblemInstance> {
    if s == 0 || s > m {
        return Err(Error::Argument(format!("ncm needs m >= s >= 1, got m = {m}, s = {s}")));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Argument(format!("theta must lie in [0, 1], got {theta}")));
    }
    let mut rng = stream(seed, DATA_STREAM);
    let l = gaussian_matrix(&mut rng, m, m.min(2 * s));
    let g0 = unit_diagonal(&(&l * l.transpose()));
    let mut e = DMatrix::identity(m, m);
    for j in 0..m {
        for i in 0..j {
            let v = rng.random_range(-1.0..=1.0);
            e[(i, j)] = v;
            e[(j, i)] = v;
        }
    }
    let g = g0 * (1.0 - theta) + e * theta;
    let h = random_weights(&mut rng, m);
    ncm_problem_with(g, h, s, seed)
}

/// Instance with caller-supplied target `G` and weights `H`.
pub fn ncm_problem_with(g: DMatrix<f64>, h: DMatrix<f64>, s: usize, seed: u64) -> Result<ProblemInstance> {
    let m = g.nrows();
    if s == 0 || s > m {
        return Err(Error::Argument(format!("ncm needs m >= s >= 1, got m = {m}, s = {s}")));
    }
    let spec = ManifoldSpec::oblique(s, m)?;
    let objective = NcmObjective::new(g, &h, s)?;
    ProblemInstance::new(format!("ncm-{m}x{s}"), spec, Arc::new(objective), seed)
}

/// Reads a dense square matrix: the order `m` on the first line, then `m`
/// rows of `m` whitespace-separated reals.
pub fn load_dense_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Argument("matrix file is empty".into()))?;
    let m: usize = header
        .trim()
        .parse()
        .map_err(|_| Error::Argument(format!("first line must be the matrix order, got {header:?}")))?;
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        let line = lines
            .next()
            .ok_or_else(|| Error::Argument(format!("expected {m} rows, found {i}")))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Argument(format!("row {}: {e}", i + 1)))?;
        if row.len() != m {
            return Err(Error::Argument(format!(
                "row {} has {} entries, expected {m}",
                i + 1,
                row.len()
            )));
        }
        for (j, v) in row.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    if lines.next().is_some() {
        return Err(Error::Argument(format!("more than {m} rows in matrix file")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_gives_unit_diagonal() {
        let mut rng = stream(1, 0);
        let l = gaussian_matrix(&mut rng, 5, 3);
        let g = unit_diagonal(&(&l * l.transpose()));
        for i in 0..5 {
            assert!((g[(i, i)] - 1.0).abs() < 1e-14);
        }
        assert!(g.symmetric_eigen().eigenvalues.min() > -1e-12);
        let h = random_weights(&mut rng, 5);
        assert_eq!(h, h.transpose());
        assert!(h.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
