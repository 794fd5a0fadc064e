//! Constraint maps and constraint dissolving operators.
//!
//! A [`ManifoldSpec`] describes `M = {x : c(x) = 0}` together with an operator
//! `A` that fixes `M` pointwise and whose composition `c(A(x))` has vanishing
//! Jacobian on `M`. Points are flat column-major vectors of length
//! `rows * cols`.
//!
//! Constraint vectors are non-redundant: symmetric residuals keep their upper
//! triangle with the diagonal, skew residuals keep the strict upper triangle,
//! and the oblique residual keeps its diagonal.

mod generic;
mod oblique;
mod quadratic;
mod sample;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dense_columns, symplectic_form, Half, Structured};

pub(crate) use generic::second_order_step;
pub use generic::{ConstraintMap, SphereConstraint, DEFAULT_ALPHA};
pub(crate) use sample::{gaussian_matrix, gaussian_vector};

use generic::GenericKernel;
use oblique::ObliqueKernel;
use quadratic::QuadraticKernel;

/// Relative feasibility tolerance: `x` counts as feasible when
/// `|c(x)| <= FEASIBILITY_TOL * (1 + |x|)`.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Smallest singular value (relative to the largest) accepted for LICQ.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Sphere,
    Oblique,
    Stiefel,
    GeneralizedStiefel,
    Grassmann,
    Hyperbolic,
    SymplecticStiefel,
    QuadraticLieGroup,
    Generic,
}

impl ManifoldKind {
    pub const ALL: [ManifoldKind; 9] = [
        ManifoldKind::Sphere,
        ManifoldKind::Oblique,
        ManifoldKind::Stiefel,
        ManifoldKind::GeneralizedStiefel,
        ManifoldKind::Grassmann,
        ManifoldKind::Hyperbolic,
        ManifoldKind::SymplecticStiefel,
        ManifoldKind::QuadraticLieGroup,
        ManifoldKind::Generic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::Sphere => "sphere",
            ManifoldKind::Oblique => "oblique",
            ManifoldKind::Stiefel => "stiefel",
            ManifoldKind::GeneralizedStiefel => "generalized_stiefel",
            ManifoldKind::Grassmann => "grassmann",
            ManifoldKind::Hyperbolic => "hyperbolic",
            ManifoldKind::SymplecticStiefel => "symplectic",
            ManifoldKind::QuadraticLieGroup => "lie_group",
            ManifoldKind::Generic => "generic",
        }
    }

    pub fn from_name(name: &str) -> Option<ManifoldKind> {
        ManifoldKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sign `nu` of a quadratic Lie group structure matrix (`R^2 = nu I`, `R^T = nu R`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Oblique(ObliqueKernel),
    Quadratic(Arc<QuadraticKernel>),
    Generic(GenericKernel),
    /// `A(x) + offset * 1`; only used to exercise failure paths.
    Offset(Box<Kernel>, f64),
}

/// A matrix manifold with its constraint map and dissolving operator.
#[derive(Debug, Clone)]
pub struct ManifoldSpec {
    kind: ManifoldKind,
    rows: usize,
    cols: usize,
    p: usize,
    kernel: Kernel,
    /// Structure data kept for samplers.
    weight: Option<DMatrix<f64>>,
    sign: Option<Sign>,
}

fn check_symmetric(b: &DMatrix<f64>, what: &str) -> Result<()> {
    if !b.is_square() {
        return Err(Error::Argument(format!("{what} must be square")));
    }
    let asym = (b - b.transpose()).norm();
    if asym > 1e-12 * b.norm().max(1.0) {
        return Err(Error::Argument(format!("{what} must be symmetric")));
    }
    Ok(())
}

impl ManifoldSpec {
    fn build(kind: ManifoldKind, rows: usize, cols: usize, p: usize, kernel: Kernel) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Argument("dimensions must be positive".into()));
        }
        if p == 0 || p >= rows * cols {
            return Err(Error::Argument(format!(
                "constraint dimension {p} must lie in [1, n) with n = {}",
                rows * cols
            )));
        }
        Ok(ManifoldSpec {
            kind,
            rows,
            cols,
            p,
            kernel,
            weight: None,
            sign: None,
        })
    }

    /// Unit sphere in `R^n`.
    pub fn sphere(n: usize) -> Result<Self> {
        Self::build(
            ManifoldKind::Sphere,
            n,
            1,
            1,
            Kernel::Oblique(ObliqueKernel { rows: n, cols: 1 }),
        )
    }

    /// `m x s` matrices with unit-norm columns.
    pub fn oblique(m: usize, s: usize) -> Result<Self> {
        Self::build(
            ManifoldKind::Oblique,
            m,
            s,
            s,
            Kernel::Oblique(ObliqueKernel { rows: m, cols: s }),
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn quadratic(
        kind: ManifoldKind,
        rows: usize,
        cols: usize,
        weight: Structured,
        target: DMatrix<f64>,
        half: Half,
        op_weight: Structured,
        left: DMatrix<f64>,
        right: DMatrix<f64>,
    ) -> Result<Self> {
        let p = half.len(cols);
        let k = QuadraticKernel {
            rows,
            cols,
            weight,
            target,
            half,
            op_weight,
            left,
            right,
        };
        Self::build(kind, rows, cols, p, Kernel::Quadratic(Arc::new(k)))
    }

    fn orthonormal(kind: ManifoldKind, m: usize, s: usize, b: Option<DMatrix<f64>>) -> Result<Self> {
        if s > m {
            return Err(Error::Argument(format!("need s <= m, got m = {m}, s = {s}")));
        }
        let w = match &b {
            Some(b) => Structured::Dense(b.clone()),
            None => Structured::Identity(m),
        };
        let eye = DMatrix::identity(s, s);
        let mut spec = Self::quadratic(kind, m, s, w.clone(), eye.clone(), Half::Upper, w, eye.clone(), eye)?;
        spec.weight = b;
        Ok(spec)
    }

    /// `X^T X = I_s`.
    pub fn stiefel(m: usize, s: usize) -> Result<Self> {
        Self::orthonormal(ManifoldKind::Stiefel, m, s, None)
    }

    /// Same constraint and operator as Stiefel; objectives are expected to be
    /// invariant under `X -> XQ` for orthogonal `Q`, which is not checked.
    pub fn grassmann(m: usize, s: usize) -> Result<Self> {
        Self::orthonormal(ManifoldKind::Grassmann, m, s, None)
    }

    /// `X^T B X = I_s` with `B` symmetric positive definite.
    pub fn generalized_stiefel(b: DMatrix<f64>, s: usize) -> Result<Self> {
        check_symmetric(&b, "B")?;
        let eig = b.clone().symmetric_eigen();
        let lo = eig.eigenvalues.min();
        if lo <= 0.0 {
            return Err(Error::Argument(format!(
                "B must be positive definite (smallest eigenvalue {lo:.3e})"
            )));
        }
        let m = b.nrows();
        Self::orthonormal(ManifoldKind::GeneralizedStiefel, m, s, Some(b))
    }

    /// `X^T B X = I_s` with `B` symmetric indefinite.
    pub fn hyperbolic(b: DMatrix<f64>, s: usize) -> Result<Self> {
        check_symmetric(&b, "B")?;
        let eig = b.clone().symmetric_eigen();
        let positive = eig.eigenvalues.iter().filter(|&&l| l > 0.0).count();
        if eig.eigenvalues.min() >= 0.0 || eig.eigenvalues.max() <= 0.0 {
            return Err(Error::Argument("B must have eigenvalues of both signs".into()));
        }
        if positive < s {
            return Err(Error::Argument(format!(
                "B has {positive} positive eigenvalues, fewer than s = {s}; the manifold is empty"
            )));
        }
        let m = b.nrows();
        Self::orthonormal(ManifoldKind::Hyperbolic, m, s, Some(b))
    }

    /// `X^T Q_m X = Q_s` for `X` of size `2m x 2s`.
    pub fn symplectic_stiefel(m: usize, s: usize) -> Result<Self> {
        if s == 0 || s > m {
            return Err(Error::Argument(format!("need 1 <= s <= m, got m = {m}, s = {s}")));
        }
        let qs = symplectic_form(s);
        let q = Structured::Symplectic { half: m, sign: 1.0 };
        Self::quadratic(
            ManifoldKind::SymplecticStiefel,
            2 * m,
            2 * s,
            q.clone(),
            qs.clone(),
            Half::StrictUpper,
            q,
            qs.transpose(),
            DMatrix::identity(2 * s, 2 * s),
        )
    }

    /// `X^T R X = R` with `R^2 = nu I` and `R^T = nu R`.
    pub fn quadratic_lie_group(r: DMatrix<f64>, nu: Sign) -> Result<Self> {
        if !r.is_square() {
            return Err(Error::Argument("R must be square".into()));
        }
        let m = r.nrows();
        let s = nu.value();
        let scale = r.norm().max(1.0);
        if (&r * &r - DMatrix::identity(m, m) * s).norm() > 1e-12 * scale
            || (r.transpose() - &r * s).norm() > 1e-12 * scale
        {
            return Err(Error::Argument("R must satisfy R^2 = nu I and R^T = nu R".into()));
        }
        let half = match nu {
            Sign::Plus => Half::Upper,
            Sign::Minus => Half::StrictUpper,
        };
        let mut spec = Self::quadratic(
            ManifoldKind::QuadraticLieGroup,
            m,
            m,
            Structured::Dense(r.clone()),
            r.clone(),
            half,
            Structured::Dense(r.clone()),
            r.transpose(),
            DMatrix::identity(m, m),
        )?;
        spec.weight = Some(r);
        spec.sign = Some(nu);
        Ok(spec)
    }

    /// Operator built from `c` alone, for points in `R^n` (one column).
    pub fn generic(map: Arc<dyn ConstraintMap>, n: usize, alpha: f64) -> Result<Self> {
        Self::generic_shaped(map, n, 1, alpha)
    }

    pub fn generic_shaped(map: Arc<dyn ConstraintMap>, rows: usize, cols: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Argument("alpha must be positive".into()));
        }
        let p = map.dim();
        let kernel = Kernel::Generic(GenericKernel {
            n: rows * cols,
            alpha,
            map,
        });
        Self::build(ManifoldKind::Generic, rows, cols, p, kernel)
    }

    /// Copy of this manifold whose operator is shifted by `offset` in every
    /// coordinate. The result violates the fixed-point axiom; it exists to
    /// exercise verification failure paths.
    pub fn with_operator_offset(mut self, offset: f64) -> Self {
        self.kernel = Kernel::Offset(Box::new(self.kernel), offset);
        self
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of constraints `p`.
    pub fn constraint_dim(&self) -> usize {
        self.p
    }

    /// Structure matrix `B` or `R`, when the kind has one.
    pub fn weight_matrix(&self) -> Option<&DMatrix<f64>> {
        self.weight.as_ref()
    }

    pub fn lie_sign(&self) -> Option<Sign> {
        self.sign
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        check_len(self.dim(), x.len())
    }

    pub fn constraint_eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(x)?;
        Ok(self.kernel.constraint(x))
    }

    /// `J_c(x) v` for `v` in `R^p`.
    pub fn constraint_jac_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(x)?;
        check_len(self.p, v.len())?;
        Ok(self.kernel.jac_apply(x, v))
    }

    /// `J_c(x)^T d`, the directional derivative of `c` along `d`.
    pub fn constraint_jac_adjoint_apply(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(x)?;
        self.check_point(d)?;
        Ok(self.kernel.jac_adjoint(x, d))
    }

    /// `(D J_c(x)[d]) w`.
    pub fn constraint_jac_diff_apply(
        &self,
        x: &DVector<f64>,
        d: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        self.check_point(x)?;
        self.check_point(d)?;
        check_len(self.p, w.len())?;
        Ok(self.kernel.jac_diff(x, d, w))
    }

    pub fn operator_apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(x)?;
        self.kernel.operator(x)
    }

    /// Forward derivative `DA(x)[d]`.
    pub fn operator_diff(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(x)?;
        self.check_point(d)?;
        self.kernel.operator_diff(x, d)
    }

    /// `J_A(x) v`, the adjoint of [`Self::operator_diff`].
    pub fn operator_adjoint_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(x)?;
        self.check_point(v)?;
        self.kernel.operator_adjoint(x, v)
    }

    /// Derivative of `x -> J_A(x) v` along `d`, with `v` fixed.
    pub fn operator_adjoint_diff_apply(
        &self,
        x: &DVector<f64>,
        d: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        self.check_point(x)?;
        self.check_point(d)?;
        self.check_point(v)?;
        self.kernel.operator_adjoint_diff(x, d, v)
    }

    /// `|c(x)|`.
    pub fn feasibility(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.constraint_eval(x)?.norm())
    }

    pub fn feasibility_tolerance(x: &DVector<f64>) -> f64 {
        FEASIBILITY_TOL * (1.0 + x.norm())
    }

    pub(crate) fn require_feasible(&self, x: &DVector<f64>) -> Result<()> {
        let residual = self.feasibility(x)?;
        let tolerance = Self::feasibility_tolerance(x);
        if residual > tolerance {
            return Err(Error::Infeasible { residual, tolerance });
        }
        Ok(())
    }

    /// Dense `n x p` transposed Jacobian `J_c(x)`.
    pub fn constraint_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        Ok(dense_columns(self.dim(), self.p, |e| self.kernel.jac_apply(x, e)))
    }

    /// Checks LICQ at `x` and returns the dense Jacobian.
    pub(crate) fn licq_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let jac = self.constraint_jacobian(x)?;
        let sv = jac.clone().singular_values();
        let (lo, hi) = (sv.min(), sv.max());
        if !(lo > RANK_TOL * hi.max(1.0)) {
            return Err(Error::Degenerate { sigma_min: lo });
        }
        Ok(jac)
    }

    /// Orthonormal basis `U_x` (n x (n - p)) of the tangent space `Null(J_c(x)^T)`.
    pub fn tangent_basis(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.require_feasible(x)?;
        let jac = self.licq_jacobian(x)?;
        let n = self.dim();
        let qr = jac.qr();
        let mut qt = DMatrix::identity(n, n);
        qr.q_tr_mul(&mut qt);
        let q = qt.transpose();
        Ok(q.columns(self.p, n - self.p).into_owned())
    }
}

impl Kernel {
    fn constraint(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Kernel::Oblique(k) => k.constraint(x),
            Kernel::Quadratic(k) => k.constraint(x),
            Kernel::Generic(k) => k.constraint(x),
            Kernel::Offset(k, _) => k.constraint(x),
        }
    }

    fn jac_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Kernel::Oblique(k) => k.jac_apply(x, v),
            Kernel::Quadratic(k) => k.jac_apply(x, v),
            Kernel::Generic(k) => k.jac_apply(x, v),
            Kernel::Offset(k, _) => k.jac_apply(x, v),
        }
    }

    fn jac_adjoint(&self, x: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
        match self {
            Kernel::Oblique(k) => k.jac_adjoint(x, d),
            Kernel::Quadratic(k) => k.jac_adjoint(x, d),
            Kernel::Generic(k) => k.jac_adjoint(x, d),
            Kernel::Offset(k, _) => k.jac_adjoint(x, d),
        }
    }

    fn jac_diff(&self, x: &DVector<f64>, d: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        match self {
            Kernel::Oblique(k) => k.jac_diff(x, d, w),
            Kernel::Quadratic(k) => k.jac_diff(x, d, w),
            Kernel::Generic(k) => k.jac_diff(x, d, w),
            Kernel::Offset(k, _) => k.jac_diff(x, d, w),
        }
    }

    fn operator(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Kernel::Oblique(k) => Ok(k.operator(x)),
            Kernel::Quadratic(k) => Ok(k.operator(x)),
            Kernel::Generic(k) => k.operator(x),
            Kernel::Offset(k, eps) => Ok(k.operator(x)?.add_scalar(*eps)),
        }
    }

    fn operator_diff(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Kernel::Oblique(k) => Ok(k.operator_diff(x, d)),
            Kernel::Quadratic(k) => Ok(k.operator_diff(x, d)),
            Kernel::Generic(k) => k.operator_diff(x, d),
            Kernel::Offset(k, _) => k.operator_diff(x, d),
        }
    }

    fn operator_adjoint(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Kernel::Oblique(k) => Ok(k.operator_adjoint(x, v)),
            Kernel::Quadratic(k) => Ok(k.operator_adjoint(x, v)),
            Kernel::Generic(k) => k.operator_adjoint(x, v),
            Kernel::Offset(k, _) => k.operator_adjoint(x, v),
        }
    }

    fn operator_adjoint_diff(&self, x: &DVector<f64>, d: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Kernel::Oblique(k) => Ok(k.operator_adjoint_diff(x, d, v)),
            Kernel::Quadratic(k) => Ok(k.operator_adjoint_diff(x, d, v)),
            Kernel::Generic(k) => k.operator_adjoint_diff(x, d, v),
            Kernel::Offset(k, _) => k.operator_adjoint_diff(x, d, v),
        }
    }

    fn generic(&self) -> Option<&GenericKernel> {
        match self {
            Kernel::Generic(k) => Some(k),
            Kernel::Offset(k, _) => k.generic(),
            _ => None,
        }
    }
}
