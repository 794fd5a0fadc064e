//! Random feasible points for each manifold kind.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::{ManifoldKind, ManifoldSpec};
use crate::error::{Error, Result};
use crate::linalg::flatten;

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub(crate) fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Orthonormal `rows x cols` matrix from the thin QR of a Gaussian matrix.
fn orthonormal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, rows, cols).qr().q()
}

/// Random element of the symplectic group `Sp(2m)` built from block
/// generators `[[P, 0], [0, P^-T]]`, `[[I, S], [0, I]]` and `[[I, 0], [S, I]]`.
/// Random entries are scaled by `0.3 / sqrt(m)` so that the blocks have
/// spectral norms of order one whatever the size.
fn symplectic_group<R: Rng + ?Sized>(rng: &mut R, m: usize) -> DMatrix<f64> {
    let scale = 0.3 / (m as f64).sqrt();
    let mut upper = DMatrix::<f64>::identity(m, m);
    for j in 0..m {
        for i in 0..j {
            upper[(i, j)] = scale * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let inv_t = upper
        .clone()
        .solve_upper_triangular(&DMatrix::identity(m, m))
        .expect("unit triangular factor is invertible")
        .transpose();
    let mut diag_block = DMatrix::zeros(2 * m, 2 * m);
    diag_block.view_mut((0, 0), (m, m)).copy_from(&upper);
    diag_block.view_mut((m, m), (m, m)).copy_from(&inv_t);

    let shear = |rng: &mut R, lower: bool| {
        let g = gaussian_matrix(rng, m, m) * scale;
        let s = (&g + g.transpose()) * 0.5;
        let mut out = DMatrix::identity(2 * m, 2 * m);
        if lower {
            out.view_mut((m, 0), (m, m)).copy_from(&s);
        } else {
            out.view_mut((0, m), (m, m)).copy_from(&s);
        }
        out
    };
    let a = shear(rng, false);
    let b = shear(rng, true);
    diag_block * a * b
}

impl ManifoldSpec {
    /// Draws a random point on the manifold.
    ///
    /// Sphere and oblique points are normalized Gaussians; the Stiefel family
    /// uses thin QR (B-orthonormalized through the Cholesky factor of `B`);
    /// symplectic points are columns of a random symplectic matrix; hyperbolic
    /// and Lie group points are perturbed base points pulled back by repeated
    /// operator application. Generic manifolds defer to
    /// [`ConstraintMap::sample_feasible`](super::ConstraintMap::sample_feasible).
    pub fn sample_feasible<R: RngCore>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let (m, s) = (self.rows, self.cols);
        match self.kind {
            ManifoldKind::Sphere | ManifoldKind::Oblique => {
                let mut x = gaussian_matrix(rng, m, s);
                for mut c in x.column_iter_mut() {
                    c.normalize_mut();
                }
                Ok(flatten(x))
            }
            ManifoldKind::Stiefel | ManifoldKind::Grassmann => Ok(flatten(orthonormal(rng, m, s))),
            ManifoldKind::GeneralizedStiefel => {
                let b = self.weight.as_ref().expect("generalized Stiefel stores B");
                let l = b
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::Numerical("B is not positive definite".into()))?;
                let q = orthonormal(rng, m, s);
                let x = l
                    .l()
                    .transpose()
                    .solve_upper_triangular(&q)
                    .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
                Ok(flatten(x))
            }
            ManifoldKind::Hyperbolic => {
                let b = self.weight.as_ref().expect("hyperbolic stores B");
                let eig = b.clone().symmetric_eigen();
                let pos: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > 0.0).collect();
                let k = pos.len();
                let mut basis = DMatrix::zeros(m, k);
                for (c, &i) in pos.iter().enumerate() {
                    basis.set_column(c, &(eig.eigenvectors.column(i) / eig.eigenvalues[i].sqrt()));
                }
                let base = basis * orthonormal(rng, k, s);
                self.perturb_and_restore(rng, flatten(base))
            }
            ManifoldKind::SymplecticStiefel => {
                let (hm, hs) = (m / 2, s / 2);
                let g = symplectic_group(rng, hm);
                let mut x = DMatrix::zeros(m, s);
                for i in 0..hs {
                    x.set_column(i, &g.column(i));
                    x.set_column(hs + i, &g.column(hm + i));
                }
                Ok(flatten(x))
            }
            ManifoldKind::QuadraticLieGroup => {
                let base = flatten(DMatrix::identity(m, m));
                self.perturb_and_restore(rng, base)
            }
            ManifoldKind::Generic => {
                let k = self.kernel.generic().expect("generic kind has a generic kernel");
                k.map
                    .sample_feasible(rng)
                    .ok_or_else(|| Error::Capability("generic constraint provides no feasible sampler".into()))
            }
        }
    }

    fn perturb_and_restore<R: RngCore>(&self, rng: &mut R, base: DVector<f64>) -> Result<DVector<f64>> {
        let n = base.len();
        let mut scale = 0.1 * base.norm() / (n as f64).sqrt();
        for _ in 0..8 {
            let start = &base + gaussian_vector(rng, n) * scale;
            if let Some(x) = self.restore(start) {
                return Ok(x);
            }
            scale *= 0.5;
        }
        self.restore(base)
            .ok_or_else(|| Error::Numerical("could not restore a feasible sample".into()))
    }

    /// Applies the operator until the residual stops decreasing.
    fn restore(&self, mut x: DVector<f64>) -> Option<DVector<f64>> {
        let mut r = self.kernel.constraint(&x).norm();
        for _ in 0..100 {
            if r == 0.0 {
                break;
            }
            let y = self.kernel.operator(&x).ok()?;
            let ry = self.kernel.constraint(&y).norm();
            if !ry.is_finite() {
                return None;
            }
            if ry >= r {
                break;
            }
            x = y;
            r = ry;
        }
        (r <= 1e-13 * (1.0 + x.norm())).then_some(x)
    }
}
