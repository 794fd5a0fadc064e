//! Cubic-regularized model minimization
//! `min_d g^T d + 1/2 d^T H d + (nu/6) |d|^3` by Lanczos tridiagonalization
//! and a secular equation in the shift `sigma = (nu/2) |d|`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::manifolds::gaussian_vector;

/// Largest Krylov dimension.
pub const MAX_LANCZOS: usize = 50;
const RESTART_SEED: u64 = 0x5eed;

/// Result of [`cubic_subproblem`].
#[derive(Debug, Clone)]
pub struct CubicStep {
    pub d: DVector<f64>,
    /// `|g + H d + (nu/2) |d| d|`.
    pub model_grad_norm: f64,
    /// `H d`, reused by callers to evaluate the model.
    pub hd: DVector<f64>,
    pub lanczos_steps: usize,
    pub hess_evals: usize,
    pub restarted: bool,
    /// The accuracy target was missed even after the restart.
    pub inexact: bool,
}

impl CubicStep {
    /// Model value `g^T d + 1/2 d^T H d + (nu/6) |d|^3`.
    pub fn model_value(&self, g: &DVector<f64>, nu: f64) -> f64 {
        g.dot(&self.d) + 0.5 * self.d.dot(&self.hd) + nu / 6.0 * self.d.norm().powi(3)
    }
}

/// Minimizes the reduced model `b^T z + 1/2 z^T T z + (nu/6) |z|^3`.
fn solve_reduced(t: &DMatrix<f64>, b: &DVector<f64>, nu: f64) -> DVector<f64> {
    let k = t.nrows();
    let eig = t.clone().symmetric_eigen();
    let c = eig.eigenvectors.transpose() * b;
    let lam = &eig.eigenvalues;
    let (imin, lmin) = lam.argmin();
    let low = (-lmin).max(0.0);
    let scale = b.norm().max(1e-300);

    let coeffs = |sigma: f64| DVector::from_fn(k, |i, _| -c[i] / (lam[i] + sigma));
    let phi = |sigma: f64| coeffs(sigma).norm() - 2.0 * sigma / nu;

    // Hard case: the gradient misses the most negative direction.
    if low > 0.0 {
        let tiny = 1e-14 * scale;
        let hard: Vec<usize> = (0..k)
            .filter(|&i| lam[i] + low <= 1e-12 * lmin.abs().max(1.0))
            .collect();
        if hard.iter().all(|&i| c[i].abs() <= tiny) {
            let mut y = DVector::from_fn(k, |i, _| if hard.contains(&i) { 0.0 } else { -c[i] / (lam[i] + low) });
            let target = 2.0 * low / nu;
            let yn = y.norm();
            if yn <= target {
                y[imin] = (target * target - yn * yn).sqrt();
                return &eig.eigenvectors * y;
            }
        }
    }

    let mut lo = low;
    let mut hi = low.max(1e-8 * scale.sqrt()).max(f64::MIN_POSITIVE);
    while !(phi(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    &eig.eigenvectors * coeffs(hi)
}

struct Lanczos {
    basis: Vec<DVector<f64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl Lanczos {
    fn tridiagonal(&self) -> DMatrix<f64> {
        let k = self.alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = self.alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = self.beta[i];
                t[(i + 1, i)] = self.beta[i];
            }
        }
        t
    }
}

struct Attempt {
    d: DVector<f64>,
    hd: DVector<f64>,
    residual: f64,
    model: f64,
    steps: usize,
    /// The Krylov space became invariant before spanning the whole space.
    breakdown: bool,
}

/// With `exhaustive`, the Krylov space grows until breakdown or the size
/// limit instead of stopping at the residual estimate.
fn attempt<H>(
    g: &DVector<f64>,
    seed: &DVector<f64>,
    hess_vec: &mut H,
    nu: f64,
    eta: f64,
    exhaustive: bool,
    evals: &mut usize,
) -> Result<Attempt>
where
    H: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = g.len();
    let kmax = MAX_LANCZOS.min(n);
    let gn = g.norm();
    let mut lz = Lanczos {
        basis: vec![seed / seed.norm()],
        alpha: Vec::new(),
        beta: Vec::new(),
    };
    let mut z = DVector::zeros(0);
    let mut broke = false;
    for k in 0..kmax {
        let q = &lz.basis[k];
        let mut w = hess_vec(q)?;
        *evals += 1;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("Hessian-vector product is not finite".into()));
        }
        let a = q.dot(&w);
        lz.alpha.push(a);
        // Full reorthogonalization, applied twice.
        for _ in 0..2 {
            for qj in &lz.basis {
                let h = qj.dot(&w);
                w.axpy(-h, qj, 1.0);
            }
        }
        let b = w.norm();
        let t = lz.tridiagonal();
        let proj = DVector::from_iterator(k + 1, lz.basis.iter().map(|q| q.dot(g)));
        z = solve_reduced(&t, &proj, nu);
        let estimate = b * z[k].abs();
        let breakdown = b <= 1e-12 * (a.abs() + lz.beta.last().copied().unwrap_or(0.0)).max(1e-300);
        if breakdown {
            broke = k + 1 < n;
            break;
        }
        if (!exhaustive && estimate <= 0.5 * eta * gn) || k + 1 == kmax {
            break;
        }
        lz.beta.push(b);
        lz.basis.push(w / b);
    }
    let mut d = DVector::zeros(n);
    for (qi, zi) in lz.basis.iter().zip(z.iter()) {
        d.axpy(*zi, qi, 1.0);
    }
    let hd = hess_vec(&d)?;
    *evals += 1;
    let dn = d.norm();
    let residual = (g + &hd + &d * (0.5 * nu * dn)).norm();
    let model = g.dot(&d) + 0.5 * d.dot(&hd) + nu / 6.0 * dn.powi(3);
    Ok(Attempt {
        d,
        hd,
        residual,
        model,
        steps: z.len(),
        breakdown: broke,
    })
}

/// Approximately minimizes `g^T d + 1/2 d^T H d + (nu/6) |d|^3`.
///
/// Lanczos runs on the Krylov space of `g` (at most [`MAX_LANCZOS`] vectors)
/// until the model-gradient norm falls below `eta |g|`. If that target is
/// missed, or the Krylov space of `g` is invariant (so directions of negative
/// curvature orthogonal to it may be invisible), one restart from a fixed
/// perturbation of `g` is tried. Among accurate results the lower model value
/// wins; the result is flagged `inexact` if no attempt met the target.
pub fn cubic_subproblem<H>(g: &DVector<f64>, mut hess_vec: H, nu: f64, eta: f64) -> Result<CubicStep>
where
    H: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    if !(nu > 0.0) {
        return Err(Error::Argument("cubic weight must be positive".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::Argument("subproblem accuracy must be positive".into()));
    }
    let n = g.len();
    let gn = g.norm();
    if gn == 0.0 {
        return Ok(CubicStep {
            d: DVector::zeros(n),
            model_grad_norm: 0.0,
            hd: DVector::zeros(n),
            lanczos_steps: 0,
            hess_evals: 0,
            restarted: false,
            inexact: false,
        });
    }
    let mut evals = 0;
    let target = eta * gn;
    let mut best = attempt(g, g, &mut hess_vec, nu, eta, false, &mut evals)?;
    let mut restarted = false;
    if best.residual > target || best.breakdown {
        restarted = true;
        let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
        let seed = g + gaussian_vector(&mut rng, n) * (1e-3 * gn / (n as f64).sqrt());
        let second = attempt(g, &seed, &mut hess_vec, nu, eta, true, &mut evals)?;
        let better = match (best.residual <= target, second.residual <= target) {
            (true, true) => second.model < best.model,
            (false, true) => true,
            (true, false) => false,
            (false, false) => second.residual < best.residual,
        };
        if better {
            best = second;
        }
    }
    Ok(CubicStep {
        inexact: best.residual > eta * gn,
        model_grad_norm: best.residual,
        d: best.d,
        hd: best.hd,
        lanczos_steps: best.steps,
        hess_evals: evals,
        restarted,
    })
}
