//! Numerical checks of the operator axioms, the quadratic feasibility
//! decrease, derivative exactness of the CDF and end-to-end stationarity
//! transfer.
//!
//! Each check returns a [`CheckReport`] listing every measured quantity with
//! its tolerance. A report passes iff all of its measures do.

mod suite;

use std::io::Write;

use nalgebra::DVector;
use rand::RngCore;
use serde::{Serialize, Serializer};

use crate::cdf::{post_process, riemannian_grad, CdfInstance};
use crate::error::{Error, Result};
use crate::manifolds::{gaussian_vector, ManifoldSpec};
use crate::solvers::{SmoothFunction, SolveConfig, SolveReport, SolverKind};

pub use suite::{catalog, run_suite, SuiteConfig, SuiteEntry};

/// Tolerance on `|A(x) - x| / (1 + |x|)` at feasible points.
pub const FIXED_POINT_TOL: f64 = 1e-12;
/// Residuals of `c(A(y))` below this are treated as exact zeros.
pub const DECREASE_FLOOR: f64 = 1e-14;
pub const SLOPE_WINDOW: (f64, f64) = (1.8, 2.2);
/// Resampling attempts for a perturbation that increases the residual.
pub const MAX_RESAMPLES: usize = 5;
pub const SYMMETRY_TOL: f64 = 1e-8;

/// One measured quantity and the bound it must satisfy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measure {
    pub name: String,
    pub value: f64,
    pub tol: f64,
}

impl Measure {
    pub fn new(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Measure {
            name: name.into(),
            value,
            tol,
        }
    }

    pub fn pass(&self) -> bool {
        self.value <= self.tol
    }

    fn ratio(&self) -> f64 {
        if self.value.is_nan() {
            f64::INFINITY
        } else if self.tol > 0.0 {
            self.value / self.tol
        } else if self.value > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

fn nan_as_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// Outcome of one check. `worst` and `tol` are taken from the measure closest
/// to (or furthest beyond) its bound; `n` is the number of sampled points.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    #[serde(serialize_with = "nan_as_null")]
    pub worst: f64,
    pub tol: f64,
    pub n: usize,
    #[serde(skip)]
    pub measures: Vec<Measure>,
}

impl CheckReport {
    pub fn from_measures(name: impl Into<String>, n: usize, measures: Vec<Measure>) -> Self {
        let pass = measures.iter().all(Measure::pass);
        let (worst, tol) = measures
            .iter()
            .max_by(|a, b| a.ratio().total_cmp(&b.ratio()))
            .map_or((0.0, 0.0), |m| (m.value, m.tol));
        CheckReport {
            name: name.into(),
            pass,
            worst,
            tol,
            n,
            measures,
        }
    }

    pub fn measure(&self, name: &str) -> Option<&Measure> {
        self.measures.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Writes one JSON object per line.
pub fn write_json_lines<W: Write>(mut out: W, reports: &[CheckReport]) -> Result<()> {
    for r in reports {
        writeln!(out, "{}", r.to_json())?;
    }
    Ok(())
}

/// Central difference `(f(x + h d) - f(x - h d)) / 2h` with
/// `h = eps^(1/3) (1 + |x|) / |d|`.
pub fn directional_fd<F: FnMut(&DVector<f64>) -> f64>(mut f: F, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let dn = d.norm();
    if dn == 0.0 {
        return 0.0;
    }
    let h = f64::EPSILON.cbrt() * (1.0 + x.norm()) / dn;
    (f(&(x + d * h)) - f(&(x - d * h))) / (2.0 * h)
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

fn unit<R: RngCore>(rng: &mut R, n: usize) -> DVector<f64> {
    gaussian_vector(rng, n).normalize()
}

/// Fixed point, null composition `J_A J_c = 0`, idempotence of `J_A` and the
/// tangent identity `DA[t] = t` at `n_points` feasible samples.
///
/// The fixed-point residual is held to [`FIXED_POINT_TOL`] relative to
/// `1 + |x|`; the other three use `tol`.
pub fn check_operator_axioms<R: RngCore>(
    spec: &ManifoldSpec,
    n_points: usize,
    tol: f64,
    rng: &mut R,
) -> Result<CheckReport> {
    let n = spec.dim();
    let (mut fixed, mut null, mut idem, mut tangent) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n_points {
        let x = spec.sample_feasible(rng)?;
        let a = spec.operator_apply(&x)?;
        fixed = fixed.max((&a - &x).norm() / (1.0 + x.norm()));

        let w = unit(rng, spec.constraint_dim());
        let jw = spec.constraint_jac_apply(&x, &w)?;
        null = null.max(spec.operator_adjoint_apply(&x, &jw)?.norm());

        let y = unit(rng, n);
        let once = spec.operator_adjoint_apply(&x, &y)?;
        let twice = spec.operator_adjoint_apply(&x, &once)?;
        idem = idem.max(rel(&twice, &once));

        let u = spec.tangent_basis(&x)?;
        let t = &u * unit(rng, u.ncols());
        tangent = tangent.max((spec.operator_diff(&x, &t)? - &t).norm());
    }
    Ok(CheckReport::from_measures(
        format!("{}/operator_axioms", spec.kind()),
        n_points,
        vec![
            Measure::new("fixed_point", fixed, FIXED_POINT_TOL),
            Measure::new("null_composition", null, tol),
            Measure::new("idempotence", idem, tol),
            Measure::new("tangent_identity", tangent, tol),
        ],
    ))
}

/// Least-squares slope of `ys` against `xs`.
fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Log-log slope of `|c(A(y_t))|` against `|c(y_t)|` for
/// `y_t = x + t (1 + |x|) d` over the given scales, at `n_points` feasible
/// samples with random unit directions `d`.
///
/// Residuals under [`DECREASE_FLOOR`] are dropped from the fit; a sample with
/// fewer than two points left passes on the floor. A direction along which
/// the operator increases the residual is redrawn up to [`MAX_RESAMPLES`]
/// times and then counted as flagged.
pub fn check_quadratic_decrease<R: RngCore>(
    spec: &ManifoldSpec,
    n_points: usize,
    scales: &[f64],
    rng: &mut R,
) -> Result<CheckReport> {
    if scales.len() < 2 || scales.windows(2).any(|w| w[1] >= w[0]) || scales[scales.len() - 1] < 1e-4 {
        return Err(Error::Argument(
            "need at least two descending scales, the smallest >= 1e-4".into(),
        ));
    }
    let n = spec.dim();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut flagged = 0usize;
    let mut floored = 0usize;
    for _ in 0..n_points {
        let x = spec.sample_feasible(rng)?;
        let mut fit = None;
        for _ in 0..=MAX_RESAMPLES {
            let d = unit(rng, n);
            let mut pts = Vec::with_capacity(scales.len());
            let mut good = true;
            for &t in scales {
                let y = &x + &d * (t * (1.0 + x.norm()));
                let before = spec.feasibility(&y)?;
                let after = spec.feasibility(&spec.operator_apply(&y)?)?;
                if !(after <= before) {
                    good = false;
                    break;
                }
                if after > DECREASE_FLOOR {
                    pts.push((before.ln(), after.ln()));
                }
            }
            if good {
                fit = Some(pts);
                break;
            }
        }
        match fit {
            None => flagged += 1,
            Some(pts) if pts.len() < 2 => floored += 1,
            Some(pts) => {
                let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                let slope = fit_slope(&xs, &ys);
                lo = lo.min(slope);
                hi = hi.max(slope);
            }
        }
    }
    let (wlo, whi) = SLOPE_WINDOW;
    let mut measures = vec![Measure::new("flagged", flagged as f64, 0.0)];
    if lo.is_finite() {
        // Distances outside the window; zero when every slope is inside.
        measures.push(Measure::new("slope_below_window", (wlo - lo).max(0.0), 0.0));
        measures.push(Measure::new("slope_above_window", (hi - whi).max(0.0), 0.0));
        measures.push(Measure::new("slope_min", lo, f64::INFINITY));
        measures.push(Measure::new("slope_max", hi, f64::INFINITY));
    }
    measures.push(Measure::new("floored", floored as f64, f64::INFINITY));
    Ok(CheckReport::from_measures(
        format!("{}/quadratic_decrease", spec.kind()),
        n_points,
        measures,
    ))
}

/// Sample points: even indices feasible, odd ones pushed off the manifold by
/// `0.1 (1 + |x|)` along a random unit direction.
fn sample_points<R: RngCore>(spec: &ManifoldSpec, n_points: usize, rng: &mut R) -> Result<Vec<DVector<f64>>> {
    let n = spec.dim();
    (0..n_points)
        .map(|i| {
            let x = spec.sample_feasible(rng)?;
            Ok(if i % 2 == 0 {
                x
            } else {
                let r = 0.1 * (1.0 + x.norm());
                &x + unit(rng, n) * r
            })
        })
        .collect()
}

/// Largest dimension at which derivative checks use every coordinate
/// direction; above it they use [`PROBE_DIRECTIONS`] random directions.
pub const FULL_FD_MAX_DIM: usize = 200;
pub const PROBE_DIRECTIONS: usize = 16;

fn probe_directions<R: RngCore>(n: usize, rng: &mut R) -> Vec<DVector<f64>> {
    if n <= FULL_FD_MAX_DIM {
        (0..n)
            .map(|i| {
                let mut e = DVector::zeros(n);
                e[i] = 1.0;
                e
            })
            .collect()
    } else {
        (0..PROBE_DIRECTIONS).map(|_| unit(rng, n)).collect()
    }
}

/// `grad h` against central differences of `h`, as a relative error of the
/// projected gradient vectors.
pub fn check_gradient_fd<R: RngCore>(
    inst: &CdfInstance,
    n_points: usize,
    tol: f64,
    rng: &mut R,
) -> Result<CheckReport> {
    check_gradient_fd_of(inst, inst.spec(), n_points, tol, rng)
}

/// [`check_gradient_fd`] for any smooth function on the ambient space of
/// `spec`, which only supplies the sample points.
pub fn check_gradient_fd_of<F: SmoothFunction, R: RngCore>(
    func: F,
    spec: &ManifoldSpec,
    n_points: usize,
    tol: f64,
    rng: &mut R,
) -> Result<CheckReport> {
    let (mut feasible, mut perturbed) = (0.0f64, 0.0f64);
    for (i, x) in sample_points(spec, n_points, rng)?.into_iter().enumerate() {
        let g = func.gradient(&x)?;
        let dirs = probe_directions(spec.dim(), rng);
        let exact = DVector::from_iterator(dirs.len(), dirs.iter().map(|d| g.dot(d)));
        let mut value_err = None;
        let approx = DVector::from_iterator(
            dirs.len(),
            dirs.iter().map(|d| {
                directional_fd(
                    |z| {
                        func.value(z).unwrap_or_else(|e| {
                            value_err.get_or_insert(e);
                            f64::NAN
                        })
                    },
                    &x,
                    d,
                )
            }),
        );
        if let Some(e) = value_err {
            return Err(e);
        }
        let err = rel(&exact, &approx);
        let err = if err.is_nan() { f64::INFINITY } else { err };
        if i % 2 == 0 {
            feasible = feasible.max(err);
        } else {
            perturbed = perturbed.max(err);
        }
    }
    Ok(CheckReport::from_measures(
        format!("{}/gradient_fd", spec.kind()),
        n_points,
        vec![
            Measure::new("feasible_rel_err", feasible, tol),
            Measure::new("perturbed_rel_err", perturbed, tol),
        ],
    ))
}

/// `hess_vec` against central differences of the gradient, the symmetry
/// pairing `<H d, e> = <d, H e>` and the exact zero at `d = 0`.
pub fn check_hess_fd<R: RngCore>(inst: &CdfInstance, n_points: usize, tol: f64, rng: &mut R) -> Result<CheckReport> {
    if !inst.has_second_order() {
        return Err(Error::Capability(
            "no Hessian-vector product available for this instance".into(),
        ));
    }
    let spec = inst.spec();
    let n = spec.dim();
    let (mut fd_err, mut asym, mut zero) = (0.0f64, 0.0f64, 0.0f64);
    for x in sample_points(spec, n_points, rng)? {
        let d = unit(rng, n);
        let e = unit(rng, n);
        let hd = inst.hess_vec(&x, &d)?;
        let he = inst.hess_vec(&x, &e)?;
        let h = f64::EPSILON.cbrt() * (1.0 + x.norm());
        let fd = (inst.gradient(&(&x + &d * h))? - inst.gradient(&(&x - &d * h))?) / (2.0 * h);
        fd_err = fd_err.max(rel(&hd, &fd));
        let (a, b) = (hd.dot(&e), d.dot(&he));
        asym = asym.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
        zero = zero.max(inst.hess_vec(&x, &DVector::zeros(n))?.norm());
    }
    Ok(CheckReport::from_measures(
        format!("{}/hess_fd", spec.kind()),
        n_points,
        vec![
            Measure::new("rel_err", fd_err, tol),
            Measure::new("symmetry", asym, SYMMETRY_TOL),
            Measure::new("zero_direction", zero, 0.0),
        ],
    ))
}

/// Feasibility target of the post-processing step in
/// [`check_stationarity_transfer`].
pub const TRANSFER_FEAS_TOL: f64 = 1e-12;

/// Outcome of [`check_stationarity_transfer`], with the solver report and the
/// post-processed point.
#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub report: CheckReport,
    pub solve: SolveReport,
    pub x_final: DVector<f64>,
    /// `f` at the post-processed point.
    pub fval: f64,
}

/// Minimizes `h` from `x0`, post-processes to [`TRANSFER_FEAS_TOL`] and
/// checks feasibility, `|grad f| <= 2 tol_grad + 1e-10` for the Riemannian
/// gradient at the restored point and monotone decrease of `h` over the
/// iterations.
pub fn check_stationarity_transfer(
    inst: &CdfInstance,
    solver: SolverKind,
    x0: &DVector<f64>,
    tol_grad: f64,
) -> Result<TransferOutcome> {
    let cfg = SolveConfig {
        grad_tol: tol_grad,
        history: true,
        ..SolveConfig::default()
    };
    let solve = solver.minimize(inst, x0, &cfg)?;
    let spec = inst.spec();
    let (x, restore_steps) = post_process(spec, &solve.x_final, TRANSFER_FEAS_TOL, 50)?;
    let feas = spec.feasibility(&x)?;
    let rgrad = riemannian_grad(spec, inst.objective().as_ref(), &x)?.norm();
    let mut rise = 0.0f64;
    let mut prev = inst.value(x0)?;
    for rec in solve.history.iter().flatten() {
        rise = rise.max(rec.fval - prev);
        prev = rec.fval;
    }
    let report = CheckReport::from_measures(
        format!("{}/stationarity_transfer/{}", spec.kind(), solver),
        1,
        vec![
            Measure::new("feasibility", feas, TRANSFER_FEAS_TOL),
            Measure::new("riemannian_grad", rgrad, 2.0 * tol_grad + 1e-10),
            Measure::new("h_increase", rise, 0.0),
            Measure::new("restore_steps", restore_steps as f64, f64::INFINITY),
            Measure::new("iterations", solve.iterations as f64, f64::INFINITY),
        ],
    );
    let fval = inst.objective().value(&x);
    Ok(TransferOutcome {
        report,
        solve,
        x_final: x,
        fval,
    })
}

#[cfg(test)]
mod tests;
