use nalgebra::{DMatrix, DVector};

use super::Objective;
use crate::error::{Error, Result};
use crate::linalg::sym;
use crate::manifolds::ManifoldSpec;

/// Least-squares multiplier `lambda(x)` solving `J_c(x) lambda ~ grad f(x)`,
/// computed from a QR factorization of `J_c(x)`.
pub fn multiplier(spec: &ManifoldSpec, objective: &dyn Objective, x: &DVector<f64>) -> Result<DVector<f64>> {
    spec.require_feasible(x)?;
    let jac = spec.licq_jacobian(x)?;
    lstsq(&jac, &objective.gradient(x))
}

fn lstsq(jac: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let qr = jac.clone().qr();
    let qtb = qr.q().transpose() * rhs;
    qr.r()
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Numerical("triangular factor is singular".into()))
}

/// `grad f(x) - J_c(x) lambda(x)`, the projection of the Euclidean gradient
/// onto the tangent space.
pub fn riemannian_grad(spec: &ManifoldSpec, objective: &dyn Objective, x: &DVector<f64>) -> Result<DVector<f64>> {
    spec.require_feasible(x)?;
    let jac = spec.licq_jacobian(x)?;
    let g = objective.gradient(x);
    let lambda = lstsq(&jac, &g)?;
    Ok(g - jac * lambda)
}

/// Projected Hessian with its spectrum.
#[derive(Debug, Clone)]
pub struct ProjectedHessian {
    /// `U^T (grad^2 f - sum_i lambda_i grad^2 c_i) U`, symmetrized.
    pub matrix: DMatrix<f64>,
    /// Eigenvalues in ascending order.
    pub eigenvalues: DVector<f64>,
}

impl ProjectedHessian {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `U_x^T (grad^2 f(x) - sum_i lambda_i(x) grad^2 c_i(x)) U_x` for an
/// orthonormal tangent basis `U_x`. Requires the objective's Hessian-vector
/// product.
pub fn projected_hessian(spec: &ManifoldSpec, objective: &dyn Objective, x: &DVector<f64>) -> Result<ProjectedHessian> {
    if !objective.has_hess_vec() {
        return Err(Error::Capability(
            "projected Hessian needs the objective's Hessian-vector product".into(),
        ));
    }
    let u = spec.tangent_basis(x)?;
    let lambda = multiplier(spec, objective, x)?;
    let k = u.ncols();
    let mut m = DMatrix::zeros(spec.dim(), k);
    for j in 0..k {
        let uj: DVector<f64> = u.column(j).into_owned();
        let hf = objective
            .hess_vec(x, &uj)
            .ok_or_else(|| Error::Capability("objective Hessian-vector product unavailable".into()))?;
        let curvature = spec.constraint_jac_diff_apply(x, &uj, &lambda)?;
        m.set_column(j, &(hf - curvature));
    }
    let matrix = sym(&(u.transpose() * m));
    let mut eigenvalues = matrix.clone().symmetric_eigen().eigenvalues;
    eigenvalues.as_mut_slice().sort_by(f64::total_cmp);
    Ok(ProjectedHessian { matrix, eigenvalues })
}
