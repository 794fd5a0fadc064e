//! Seeded benchmark problems.
//!
//! Each generator returns a [`ProblemInstance`] pairing a [`ManifoldSpec`]
//! with an [`Objective`]. All data comes from a ChaCha stream keyed by the
//! seed, so equal arguments give bit-identical instances.

mod ncm;
mod sparse;

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cdf::{FnObjective, Objective};
use crate::error::{Error, Result};
use crate::linalg::{as_matrix, flatten};
use crate::manifolds::{gaussian_matrix, gaussian_vector, ManifoldSpec};
use crate::verify::directional_fd;

pub use ncm::{load_dense_matrix, ncm_problem, ncm_problem_with, NcmObjective};
pub use sparse::CooMatrix;

/// Stream offsets so that problem data and starting points never share draws.
const DATA_STREAM: u64 = 0;
const START_STREAM: u64 = 1;
const CHECK_STREAM: u64 = 2;

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// A manifold, an objective and the data needed to reproduce them.
#[derive(Clone)]
pub struct ProblemInstance {
    pub name: String,
    pub spec: ManifoldSpec,
    pub objective: Arc<dyn Objective>,
    /// Optimal value over the manifold when it is known in closed form or
    /// from a dense oracle.
    pub known_optimum: Option<f64>,
    pub seed: u64,
    pencil: Option<(CooMatrix, CooMatrix)>,
}

impl std::fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("name", &self.name)
            .field("kind", &self.spec.kind())
            .field("shape", &self.spec.shape())
            .field("known_optimum", &self.known_optimum)
            .field("seed", &self.seed)
            .finish()
    }
}

impl ProblemInstance {
    /// Builds an instance. Debug builds check the objective gradient against
    /// finite differences at three random points near the manifold.
    pub fn new(name: impl Into<String>, spec: ManifoldSpec, objective: Arc<dyn Objective>, seed: u64) -> Result<Self> {
        let inst = ProblemInstance {
            name: name.into(),
            spec,
            objective,
            known_optimum: None,
            seed,
            pencil: None,
        };
        if cfg!(debug_assertions) {
            let err = inst.gradient_check_error(3)?;
            if err > 1e-5 {
                return Err(Error::Numerical(format!(
                    "objective gradient of {} disagrees with finite differences (relative error {err:.3e})",
                    inst.name
                )));
            }
        }
        Ok(inst)
    }

    pub fn with_known_optimum(mut self, value: f64) -> Self {
        self.known_optimum = Some(value);
        self
    }

    /// Worst relative error between `grad f . d` and a central difference of
    /// `f` along random unit directions `d` at `n_points` random points.
    pub fn gradient_check_error(&self, n_points: usize) -> Result<f64> {
        let mut rng = stream(self.seed, CHECK_STREAM);
        let n = self.spec.dim();
        let mut worst = 0.0f64;
        for _ in 0..n_points {
            let x = self.spec.sample_feasible(&mut rng)? + gaussian_vector(&mut rng, n) * 1e-2;
            let d = gaussian_vector(&mut rng, n).normalize();
            let g = self.objective.gradient(&x);
            let exact = g.dot(&d);
            let approx = directional_fd(|z| self.objective.value(z), &x, &d);
            let scale = exact
                .abs()
                .max(approx.abs())
                .max(1e-8 * g.norm())
                .max(f64::MIN_POSITIVE);
            worst = worst.max((exact - approx).abs() / scale);
        }
        Ok(worst)
    }

    /// Deterministic feasible starting point derived from the seed.
    pub fn initial_point(&self) -> Result<DVector<f64>> {
        self.spec.sample_feasible(&mut stream(self.seed, START_STREAM))
    }

    /// `(A, B)` for generalized eigenvalue instances.
    pub fn pencil(&self) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        self.pencil.as_ref().map(|(a, b)| (a.to_dense(), b.to_dense()))
    }
}

/// `f(x) = 1/2 |x - w|^2`.
#[derive(Debug, Clone)]
pub struct NearestPointObjective {
    target: DVector<f64>,
}

impl NearestPointObjective {
    pub fn new(target: DVector<f64>) -> Self {
        NearestPointObjective { target }
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }
}

impl Objective for NearestPointObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x - &self.target).norm_squared()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.target
    }
    fn hess_vec(&self, _x: &DVector<f64>, d: &DVector<f64>) -> Option<DVector<f64>> {
        Some(d.clone())
    }
    fn has_hess_vec(&self) -> bool {
        true
    }
}

/// Nearest symplectic matrix: `1/2 |X - W|_F^2` over the `2m x 2s`
/// symplectic Stiefel manifold, with `W` Gaussian scaled to unit norm.
pub fn nsm_problem(m: usize, s: usize, seed: u64) -> Result<ProblemInstance> {
    if s == 0 || s > m {
        return Err(Error::Argument(format!("nsm needs m >= s >= 1, got m = {m}, s = {s}")));
    }
    let spec = ManifoldSpec::symplectic_stiefel(m, s)?;
    let mut rng = stream(seed, DATA_STREAM);
    let w = flatten(gaussian_matrix(&mut rng, 2 * m, 2 * s)).normalize();
    ProblemInstance::new(
        format!("nsm-{m}x{s}"),
        spec,
        Arc::new(NearestPointObjective::new(w)),
        seed,
    )
}

/// `f(X) = -1/2 tr(X^T A X)` with a sparse symmetric `A`.
#[derive(Debug, Clone)]
pub struct TraceObjective {
    a: CooMatrix,
    cols: usize,
}

impl TraceObjective {
    pub fn new(a: CooMatrix, cols: usize) -> Self {
        TraceObjective { a, cols }
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        flatten(self.a.mul(&as_matrix(x, self.a.order(), self.cols)))
    }
}

impl Objective for TraceObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        -0.5 * x.dot(&self.apply(x))
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        -self.apply(x)
    }
    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let ax = self.apply(x);
        (-0.5 * x.dot(&ax), -ax)
    }
    fn hess_vec(&self, _x: &DVector<f64>, d: &DVector<f64>) -> Option<DVector<f64>> {
        Some(-self.apply(d))
    }
    fn has_hess_vec(&self) -> bool {
        true
    }
}

/// Largest matrix order for which generators attach the dense oracle value.
pub const DENSE_ORACLE_MAX: usize = 400;

/// Generalized eigenvalue problem `min -1/2 tr(X^T A X)` subject to
/// `X^T B X = I_s`.
///
/// `A` and `B` are sparse symmetric random matrices with the given density,
/// each divided by its spectral norm; `B` is then shifted by `1.1 I` so that
/// its spectrum lies in `[0.1, 2.1]`.
pub fn geneig_problem(m: usize, s: usize, density: f64, seed: u64) -> Result<ProblemInstance> {
    if s == 0 || s >= m {
        return Err(Error::Argument(format!(
            "geneig needs m > s >= 1, got m = {m}, s = {s}"
        )));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Argument(format!("density must lie in (0, 1], got {density}")));
    }
    let mut rng = stream(seed, DATA_STREAM);
    let normalized = |c: CooMatrix| {
        let norm = c.symmetric_norm();
        if norm > 0.0 {
            c.scaled(1.0 / norm)
        } else {
            c
        }
    };
    let a = normalized(CooMatrix::random_symmetric(&mut rng, m, density));
    let b = normalized(CooMatrix::random_symmetric(&mut rng, m, density)).shifted(1.1);
    let b_dense = b.to_dense();
    let spec = ManifoldSpec::generalized_stiefel(b_dense.clone(), s)?;
    let objective = Arc::new(TraceObjective::new(a.clone(), s));
    let mut inst = ProblemInstance::new(format!("geneig-{m}x{s}"), spec, objective, seed)?;
    if m <= DENSE_ORACLE_MAX {
        inst.known_optimum = Some(-0.5 * geneig_dense_oracle(&a.to_dense(), &b_dense, s)?);
    }
    inst.pencil = Some((a, b));
    Ok(inst)
}

/// Sum of the `s` largest eigenvalues of the symmetric-definite pencil
/// `(A, B)`, from the Cholesky reduction `L^-1 A L^-T`.
pub fn geneig_dense_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>, s: usize) -> Result<f64> {
    let m = a.nrows();
    if !a.is_square() || b.shape() != a.shape() {
        return Err(Error::Argument("A and B must be square of the same order".into()));
    }
    if s == 0 || s > m {
        return Err(Error::Argument(format!("need 1 <= s <= {m}, got {s}")));
    }
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Argument("B is not positive definite".into()))?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let mut eig: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    Ok(eig[..s].iter().sum())
}

/// The two-dimensional example `min |w - (1, 1)|^2` subject to
/// `w1^2 - w2^2 = 1`.
pub fn hyperbola2d_problem() -> Result<ProblemInstance> {
    let spec = ManifoldSpec::hyperbolic(DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, -1.0])), 1)?;
    let t = DVector::from_element(2, 1.0);
    let t2 = t.clone();
    let objective =
        FnObjective::new(move |w| (w - &t).norm_squared(), move |w| (w - &t2) * 2.0).with_hess_vec(|_, d| d * 2.0);
    ProblemInstance::new("hyperbola2d", spec, Arc::new(objective), 0)
}

/// Problem families known to the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Nsm,
    Geneig,
    Ncm,
    Hyperbola2d,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::Nsm,
        ProblemKind::Geneig,
        ProblemKind::Ncm,
        ProblemKind::Hyperbola2d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Nsm => "nsm",
            ProblemKind::Geneig => "geneig",
            ProblemKind::Ncm => "ncm",
            ProblemKind::Hyperbola2d => "hyperbola2d",
        }
    }

    pub fn from_name(name: &str) -> Option<ProblemKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Parameters accepted by [`build_problem`]; unused fields are ignored.
#[derive(Debug, Clone)]
pub struct ProblemParams {
    pub m: usize,
    pub s: usize,
    pub density: f64,
    pub theta: f64,
    pub seed: u64,
    /// Optional dense target matrix for the correlation problem.
    pub ncm_matrix: Option<std::path::PathBuf>,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            m: 10,
            s: 2,
            density: 0.01,
            theta: 0.1,
            seed: 0,
            ncm_matrix: None,
        }
    }
}

pub fn build_problem(kind: ProblemKind, p: &ProblemParams) -> Result<ProblemInstance> {
    match kind {
        ProblemKind::Nsm => nsm_problem(p.m, p.s, p.seed),
        ProblemKind::Geneig => geneig_problem(p.m, p.s, p.density, p.seed),
        ProblemKind::Ncm => match &p.ncm_matrix {
            Some(path) => ncm_from_file(path, p.s, p.seed),
            None => ncm_problem(p.m, p.s, p.theta, p.seed),
        },
        ProblemKind::Hyperbola2d => hyperbola2d_problem(),
    }
}

fn ncm_from_file(path: &Path, s: usize, seed: u64) -> Result<ProblemInstance> {
    let g = load_dense_matrix(path)?;
    let h = ncm::random_weights(&mut stream(seed, DATA_STREAM), g.nrows());
    ncm_problem_with(g, h, s, seed)
}

#[cfg(test)]
mod tests;
