use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Square sparse matrix in coordinate form, applied without densifying.
#[derive(Debug, Clone, PartialEq)]
pub struct CooMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    pub fn new(n: usize, entries: Vec<(usize, usize, f64)>) -> Self {
        assert!(entries.iter().all(|&(i, j, _)| i < n && j < n), "entry out of range");
        CooMatrix { n, entries }
    }

    /// Symmetric random matrix: each entry of the upper triangle (diagonal
    /// included) is kept with probability `density` and drawn from N(0, 1).
    pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize, density: f64) -> Self {
        let mut entries = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                if rng.random::<f64>() < density {
                    let v: f64 = rng.sample(StandardNormal);
                    entries.push((i, j, v));
                    if i != j {
                        entries.push((j, i, v));
                    }
                }
            }
        }
        CooMatrix { n, entries }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for e in &mut self.entries {
            e.2 *= factor;
        }
        self
    }

    /// Adds `shift` to every diagonal entry.
    pub fn shifted(mut self, shift: f64) -> Self {
        self.entries.extend((0..self.n).map(|i| (i, i, shift)));
        self
    }

    /// `self * x` for a dense `x` with `order()` rows.
    pub fn mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.n, "row count mismatch");
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let src = x.column(c);
            let mut dst = out.column_mut(c);
            for &(i, j, v) in &self.entries {
                dst[i] += v * src[j];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            out[(i, j)] += v;
        }
        out
    }

    /// Spectral norm of a symmetric matrix, i.e. its largest absolute eigenvalue.
    pub fn symmetric_norm(&self) -> f64 {
        let eig = self.to_dense().symmetric_eigen().eigenvalues;
        eig.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
