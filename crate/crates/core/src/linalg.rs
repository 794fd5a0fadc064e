//! Dense linear algebra helpers shared by the manifold kernels.
//!
//! Points are flat column-major vectors; matrix-valued kernels reshape them
//! on entry and flatten on exit.

use nalgebra::{DMatrix, DVector};

/// Reshape a flat column-major vector into a `rows x cols` matrix.
pub fn as_matrix(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// Flatten a matrix column-major.
pub fn flatten(m: DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Which part of a square residual matrix is kept when vectorizing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    /// Upper triangle including the diagonal, for symmetric residuals.
    Upper,
    /// Strict upper triangle, for skew-symmetric residuals.
    StrictUpper,
}

impl Half {
    pub fn len(self, s: usize) -> usize {
        match self {
            Half::Upper => s * (s + 1) / 2,
            Half::StrictUpper => s * s.saturating_sub(1) / 2,
        }
    }

    fn includes(self, i: usize, j: usize) -> bool {
        match self {
            Half::Upper => i <= j,
            Half::StrictUpper => i < j,
        }
    }
}

/// Vectorize the selected triangle of a square matrix, column by column.
pub fn half_vec(m: &DMatrix<f64>, half: Half) -> DVector<f64> {
    let s = m.nrows();
    let mut out = Vec::with_capacity(half.len(s));
    for j in 0..s {
        for i in 0..s {
            if half.includes(i, j) {
                out.push(m[(i, j)]);
            }
        }
    }
    DVector::from_vec(out)
}

/// Place a half-vectorized residual back into an otherwise zero matrix.
pub fn half_unvec(v: &DVector<f64>, s: usize, half: Half) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(s, s);
    let mut k = 0;
    for j in 0..s {
        for i in 0..s {
            if half.includes(i, j) {
                m[(i, j)] = v[k];
                k += 1;
            }
        }
    }
    m
}

/// The canonical symplectic form `[[0, I], [-I, 0]]` of order `2 * half`.
pub fn symplectic_form(half: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(2 * half, 2 * half);
    for i in 0..half {
        q[(i, half + i)] = 1.0;
        q[(half + i, i)] = -1.0;
    }
    q
}

/// A square matrix with optional structure exploited by left multiplication.
#[derive(Debug, Clone)]
pub enum Structured {
    Identity(usize),
    Dense(DMatrix<f64>),
    /// `sign * [[0, I], [-I, 0]]` with blocks of order `half`.
    Symplectic {
        half: usize,
        sign: f64,
    },
}

impl Structured {
    pub fn order(&self) -> usize {
        match self {
            Structured::Identity(n) => *n,
            Structured::Dense(m) => m.nrows(),
            Structured::Symplectic { half, .. } => 2 * half,
        }
    }

    /// Returns `self * x`.
    pub fn mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Structured::Identity(_) => x.clone(),
            Structured::Dense(m) => m * x,
            Structured::Symplectic { half, sign } => {
                let h = *half;
                let mut out = DMatrix::zeros(x.nrows(), x.ncols());
                out.rows_mut(0, h).copy_from(&(x.rows(h, h) * *sign));
                out.rows_mut(h, h).copy_from(&(x.rows(0, h) * -*sign));
                out
            }
        }
    }

    pub fn transpose(&self) -> Structured {
        match self {
            Structured::Identity(n) => Structured::Identity(*n),
            Structured::Dense(m) => Structured::Dense(m.transpose()),
            Structured::Symplectic { half, sign } => Structured::Symplectic {
                half: *half,
                sign: -*sign,
            },
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Structured::Identity(n) => DMatrix::identity(*n, *n),
            Structured::Dense(m) => m.clone(),
            Structured::Symplectic { half, sign } => symplectic_form(*half) * *sign,
        }
    }
}

/// Assemble the dense `n x p` matrix whose columns are `apply(e_i)`.
pub fn dense_columns<F>(n: usize, p: usize, mut apply: F) -> DMatrix<f64>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut out = DMatrix::zeros(n, p);
    let mut e = DVector::zeros(p);
    for i in 0..p {
        e[i] = 1.0;
        out.set_column(i, &apply(&e));
        e[i] = 0.0;
    }
    out
}

/// Symmetric part `(m + m^T) / 2`.
pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_roundtrip_counts() {
        assert_eq!(Half::Upper.len(3), 6);
        assert_eq!(Half::StrictUpper.len(4), 6);
        let m = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        let v = half_vec(&m, Half::Upper);
        assert_eq!(v.as_slice(), &[0.0, 1.0, 4.0, 2.0, 5.0, 8.0]);
        let back = half_unvec(&v, 3, Half::Upper);
        assert_eq!(back[(1, 2)], 5.0);
        assert_eq!(back[(2, 1)], 0.0);
    }

    #[test]
    fn symplectic_structure_matches_dense() {
        let x = DMatrix::from_fn(6, 2, |i, j| (i as f64) - 2.0 * j as f64);
        let s = Structured::Symplectic { half: 3, sign: 1.0 };
        assert_eq!(s.mul(&x), symplectic_form(3) * &x);
        assert_eq!(s.transpose().mul(&x), symplectic_form(3).transpose() * &x);
    }

    #[test]
    fn flatten_is_column_major() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(flatten(m.clone()).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(as_matrix(&flatten(m.clone()), 2, 2), m);
    }
}
