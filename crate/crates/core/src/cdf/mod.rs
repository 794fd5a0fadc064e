//! The constraint dissolving function
//!
//! ```text
//! h(x) = f(A(x)) + (beta/2) |c(x)|^2
//! ```
//!
//! built from a [`ManifoldSpec`] and an [`Objective`], with its gradient and
//! Hessian-vector product, the penalty estimator, feasibility restoration and
//! Riemannian diagnostics.

mod penalty;
mod restore;
mod riemannian;

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::manifolds::{second_order_step, ManifoldSpec};
use crate::solvers::SmoothFunction;

pub use penalty::{estimate_beta, sample_ball, PenaltyConfig};
pub use restore::{post_process, post_process_traced, Restoration};
pub use riemannian::{multiplier, projected_hessian, riemannian_grad, ProjectedHessian};

/// Smooth objective `f` on the ambient space.
///
/// `hess_vec` returns `Some` exactly when `has_hess_vec` is true.
pub trait Objective: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        (self.value(x), self.gradient(x))
    }

    fn hess_vec(&self, _x: &DVector<f64>, _d: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    fn has_hess_vec(&self) -> bool {
        false
    }
}

type ValueFn = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type HessFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// An [`Objective`] assembled from closures.
pub struct FnObjective {
    value: ValueFn,
    gradient: GradFn,
    hess_vec: Option<HessFn>,
}

impl FnObjective {
    pub fn new(
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        FnObjective {
            value: Box::new(value),
            gradient: Box::new(gradient),
            hess_vec: None,
        }
    }

    pub fn with_hess_vec(
        mut self,
        hess_vec: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hess_vec = Some(Box::new(hess_vec));
        self
    }
}

impl fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObjective")
            .field("hess_vec", &self.hess_vec.is_some())
            .finish()
    }
}

impl Objective for FnObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }
    fn hess_vec(&self, x: &DVector<f64>, d: &DVector<f64>) -> Option<DVector<f64>> {
        self.hess_vec.as_ref().map(|h| h(x, d))
    }
    fn has_hess_vec(&self) -> bool {
        self.hess_vec.is_some()
    }
}

/// How [`CdfInstance::hess_vec`] obtains second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessMode {
    /// Assemble from the objective's Hessian-vector product; a capability
    /// error if the objective has none.
    Exact,
    /// Central differences of the gradient of `h`.
    FiniteDifference,
}

/// `h(x) = f(A(x)) + (beta/2) |c(x)|^2` for a fixed manifold, objective and `beta`.
#[derive(Clone)]
pub struct CdfInstance {
    spec: ManifoldSpec,
    objective: Arc<dyn Objective>,
    beta: f64,
    hess_mode: HessMode,
}

impl fmt::Debug for CdfInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CdfInstance")
            .field("kind", &self.spec.kind())
            .field("shape", &self.spec.shape())
            .field("beta", &self.beta)
            .field("hess_mode", &self.hess_mode)
            .finish()
    }
}

impl CdfInstance {
    pub fn new(spec: ManifoldSpec, objective: Arc<dyn Objective>, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Argument(format!("beta must be positive and finite, got {beta}")));
        }
        Ok(CdfInstance {
            spec,
            objective,
            beta,
            hess_mode: HessMode::Exact,
        })
    }

    pub fn with_hess_mode(mut self, mode: HessMode) -> Self {
        self.hess_mode = mode;
        self
    }

    /// Same manifold and objective with a different penalty parameter.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Ok(CdfInstance::new(self.spec.clone(), self.objective.clone(), beta)?.with_hess_mode(self.hess_mode))
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn objective(&self) -> &Arc<dyn Objective> {
        &self.objective
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn hess_mode(&self) -> HessMode {
        self.hess_mode
    }

    /// Whether `hess_vec` can be evaluated in the current mode.
    pub fn has_second_order(&self) -> bool {
        self.hess_mode == HessMode::FiniteDifference || self.objective.has_hess_vec()
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        let a = self.spec.operator_apply(x)?;
        let c = self.spec.constraint_eval(x)?;
        Ok(self.objective.value(&a) + 0.5 * self.beta * c.norm_squared())
    }

    /// `grad h(x) = J_A(x) grad f(A(x)) + beta J_c(x) c(x)`.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.value_and_gradient(x).map(|(_, g)| g)
    }

    pub fn value_and_gradient(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let a = self.spec.operator_apply(x)?;
        let c = self.spec.constraint_eval(x)?;
        let (fa, ga) = self.objective.value_and_gradient(&a);
        let grad = self.spec.operator_adjoint_apply(x, &ga)? + self.spec.constraint_jac_apply(x, &c)? * self.beta;
        Ok((fa + 0.5 * self.beta * c.norm_squared(), grad))
    }

    /// `grad^2 h(x) d`.
    ///
    /// In exact mode this is
    /// `J_A grad^2 f(A) DA[d] + (DJ_A[d]) grad f(A) + beta (J_c J_c^T d + (DJ_c[d]) c)`.
    pub fn hess_vec(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.spec.dim(), d.len())?;
        match self.hess_mode {
            HessMode::FiniteDifference => self.hess_vec_fd(x, d),
            HessMode::Exact => {
                if !self.objective.has_hess_vec() {
                    return Err(Error::Capability(
                        "objective has no Hessian-vector product; request finite-difference mode".into(),
                    ));
                }
                let spec = &self.spec;
                let a = spec.operator_apply(x)?;
                let ga = self.objective.gradient(&a);
                let da = spec.operator_diff(x, d)?;
                let hf = self
                    .objective
                    .hess_vec(&a, &da)
                    .ok_or_else(|| Error::Capability("objective Hessian-vector product unavailable".into()))?;
                let c = spec.constraint_eval(x)?;
                let jtd = spec.constraint_jac_adjoint_apply(x, d)?;
                let penalty = spec.constraint_jac_apply(x, &jtd)? + spec.constraint_jac_diff_apply(x, d, &c)?;
                Ok(spec.operator_adjoint_apply(x, &hf)?
                    + spec.operator_adjoint_diff_apply(x, d, &ga)?
                    + penalty * self.beta)
            }
        }
    }

    fn hess_vec_fd(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
        let dn = d.norm();
        if dn == 0.0 {
            return Ok(DVector::zeros(d.len()));
        }
        let h = second_order_step() * (1.0 + x.norm());
        let u = d / dn;
        let plus = self.gradient(&(x + &u * h))?;
        let minus = self.gradient(&(x - &u * h))?;
        Ok((plus - minus) * (dn / (2.0 * h)))
    }

    /// `|c(x)|`.
    pub fn feasibility(&self, x: &DVector<f64>) -> Result<f64> {
        self.spec.feasibility(x)
    }
}

impl SmoothFunction for CdfInstance {
    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        CdfInstance::value(self, x)
    }
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        CdfInstance::gradient(self, x)
    }
    fn value_and_gradient(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        CdfInstance::value_and_gradient(self, x)
    }
    fn hess_vec(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
        CdfInstance::hess_vec(self, x, d)
    }
    fn has_hess_vec(&self) -> bool {
        self.has_second_order()
    }
}

#[cfg(test)]
mod tests;
