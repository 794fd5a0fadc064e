use nalgebra::DVector;
use rand::{Rng, RngCore};

use super::Objective;
use crate::error::{Error, Result};
use crate::manifolds::{gaussian_vector, ManifoldSpec};

/// Sampling parameters of [`estimate_beta`].
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    /// Number of sampled points.
    pub n_samples: usize,
    /// Radius of the sampling ball around the reference point.
    pub radius: f64,
    /// Safety factor, at least 1.
    pub safety: f64,
    /// Regularization of the denominator.
    pub floor: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            n_samples: 20,
            radius: 1.0,
            safety: 2.5,
            floor: 1e-10,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Argument("n_samples must be positive".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::Argument("sampling radius must be positive".into()));
        }
        if !(self.safety >= 1.0) {
            return Err(Error::Argument("safety factor must be at least 1".into()));
        }
        if !(self.floor >= 0.0) {
            return Err(Error::Argument("denominator floor must be non-negative".into()));
        }
        Ok(())
    }
}

/// Uniform sample from the Euclidean ball of the given radius around `center`:
/// a normalized Gaussian direction scaled by `radius * u^(1/n)`.
pub fn sample_ball<R: RngCore>(rng: &mut R, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    let n = center.len();
    let dir = gaussian_vector(rng, n).normalize();
    let u: f64 = rng.random();
    center + dir * (radius * u.powf(1.0 / n as f64))
}

/// Sampled estimate of the penalty parameter:
///
/// ```text
/// 2 theta * max_i max{ (f(A(A(x_i))) - f(A(x_i))) / (| |c(x_i)|^2 - |c(A(x_i))|^2 | + eps), 0 }
/// ```
///
/// over `n_samples` points drawn by [`sample_ball`] around `x_ref`.
pub fn estimate_beta<R: RngCore>(
    spec: &ManifoldSpec,
    objective: &dyn Objective,
    x_ref: &DVector<f64>,
    cfg: &PenaltyConfig,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    spec.require_feasible(x_ref)?;
    let mut worst = 0.0f64;
    for _ in 0..cfg.n_samples {
        let x = sample_ball(rng, x_ref, cfg.radius);
        let a = spec.operator_apply(&x)?;
        let aa = spec.operator_apply(&a)?;
        let num = objective.value(&aa) - objective.value(&a);
        let den = (spec.feasibility(&x)?.powi(2) - spec.feasibility(&a)?.powi(2)).abs() + cfg.floor;
        let ratio = num / den;
        if ratio.is_nan() {
            return Err(Error::Numerical(
                "penalty estimate is not a number at a sampled point".into(),
            ));
        }
        worst = worst.max(ratio);
    }
    Ok(2.0 * cfg.safety * worst)
}
