//! Strong Wolfe line search (bracketing followed by zoom with safeguarded
//! cubic interpolation).

use nalgebra::DVector;

use super::config::SolveConfig;
use super::driver::Driver;
use super::function::{Counted, SmoothFunction};
use crate::error::{Error, Result};

const MAX_BRACKET: usize = 40;
const MAX_ZOOM: usize = 60;
const MAX_STEP: f64 = 1e10;

/// An accepted step together with the function data at `x + alpha d`.
#[derive(Debug, Clone)]
pub struct WolfeStep {
    pub alpha: f64,
    pub fval: f64,
    pub grad: DVector<f64>,
    /// Trial points evaluated by the search.
    pub evaluations: usize,
}

/// Finds `alpha > 0` with
/// `f(x + alpha d) <= f(x) + c1 alpha g^T d` and `|g(x + alpha d)^T d| <= c2 |g^T d|`.
///
/// Starts from `alpha = 1`. A non-descent direction is an argument error;
/// failing to find an acceptable step is reported as stagnation at `x`.
pub fn line_search_wolfe<F: SmoothFunction>(
    func: F,
    x: &DVector<f64>,
    direction: &DVector<f64>,
    cfg: &SolveConfig,
) -> Result<WolfeStep> {
    cfg.validate()?;
    crate::error::check_len(x.len(), direction.len())?;
    let f = Counted::new(func);
    let (fx, gx) = f.value_and_gradient(x)?;
    let slope = gx.dot(direction);
    if !(slope < 0.0) {
        return Err(Error::Argument(format!(
            "direction is not a descent direction (g^T d = {slope:e})"
        )));
    }
    match strong_wolfe(&f, x, fx, slope, direction, 1.0, cfg.c1, cfg.c2)? {
        Ok(step) => Ok(step),
        Err(fail) => Err(fail.into_stagnation(Driver::new(cfg), &f, x, direction, fx, &gx)),
    }
}

/// Why a search failed, with the lowest trial point seen (if it improved on `f(x)`).
#[derive(Debug)]
pub(crate) struct SearchFailure {
    pub reason: String,
    pub best: Option<WolfeStep>,
}

struct Trial {
    a: f64,
    f: f64,
    /// Directional derivative `g(x + a d)^T d`.
    d: f64,
    grad: DVector<f64>,
}

impl Trial {
    fn finite(&self) -> bool {
        self.f.is_finite() && self.d.is_finite()
    }
}

fn evaluate<F: SmoothFunction>(f: &Counted<F>, x: &DVector<f64>, dir: &DVector<f64>, a: f64) -> Result<Trial> {
    let (fv, g) = f.value_and_gradient(&(x + dir * a))?;
    Ok(Trial {
        a,
        f: fv,
        d: g.dot(dir),
        grad: g,
    })
}

/// Minimizer of the cubic matching values and slopes at `a` and `b`, if it exists.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    t.is_finite().then_some(t)
}

impl SearchFailure {
    /// Stagnation error reporting the best point known to the caller.
    pub(crate) fn into_stagnation<F: SmoothFunction>(
        self,
        drv: Driver<'_>,
        f: &Counted<F>,
        x: &DVector<f64>,
        dir: &DVector<f64>,
        fx: f64,
        gx: &DVector<f64>,
    ) -> Error {
        match self.best {
            Some(b) => drv.stagnation(f, x + dir * b.alpha, b.fval, b.grad.norm(), self.reason),
            None => drv.stagnation(f, x.clone(), fx, gx.norm(), self.reason),
        }
    }
}

/// Outer `Err` is an evaluation error; inner `Err` describes a failed search.
#[allow(clippy::too_many_arguments)]
pub(crate) fn strong_wolfe<F: SmoothFunction>(
    f: &Counted<F>,
    x: &DVector<f64>,
    f0: f64,
    d0: f64,
    dir: &DVector<f64>,
    alpha0: f64,
    c1: f64,
    c2: f64,
) -> Result<std::result::Result<WolfeStep, SearchFailure>> {
    let mut evals = 0usize;
    let mut best: Option<(f64, f64, DVector<f64>)> = None;
    let note = |t: &Trial, best: &mut Option<(f64, f64, DVector<f64>)>| {
        if t.finite() && t.f < best.as_ref().map_or(f0, |b| b.1) {
            *best = Some((t.a, t.f, t.grad.clone()));
        }
    };
    let fail = |reason: String, best: Option<(f64, f64, DVector<f64>)>, evals: usize| {
        Ok(Err(SearchFailure {
            reason,
            best: best.map(|(alpha, fval, grad)| WolfeStep {
                alpha,
                fval,
                grad,
                evaluations: evals,
            }),
        }))
    };
    let armijo = |t: &Trial| t.f <= f0 + c1 * t.a * d0;
    let curvature = |t: &Trial| t.d.abs() <= -c2 * d0;
    let accept = |t: Trial, evals: usize| {
        Ok(Ok(WolfeStep {
            alpha: t.a,
            fval: t.f,
            grad: t.grad,
            evaluations: evals,
        }))
    };

    let mut prev = Trial {
        a: 0.0,
        f: f0,
        d: d0,
        grad: DVector::zeros(0),
    };
    let mut a = alpha0.clamp(f64::MIN_POSITIVE, MAX_STEP);
    let mut bracket = None;
    for i in 0..MAX_BRACKET {
        let t = evaluate(f, x, dir, a)?;
        evals += 1;
        note(&t, &mut best);
        if !t.finite() {
            // Overflow or a domain error: treat as a step that is too long.
            bracket = Some((prev, t));
            break;
        }
        if !armijo(&t) || (i > 0 && t.f >= prev.f) {
            bracket = Some((prev, t));
            break;
        }
        if curvature(&t) {
            return accept(t, evals);
        }
        if t.d >= 0.0 {
            bracket = Some((t, prev));
            break;
        }
        if a >= MAX_STEP {
            return fail(format!("no acceptable step below {MAX_STEP:e}"), best, evals);
        }
        let next = (2.0 * a).min(MAX_STEP);
        prev = t;
        a = next;
    }
    let Some((mut lo, mut hi)) = bracket else {
        return fail("line search could not bracket a Wolfe step".into(), best, evals);
    };

    for _ in 0..MAX_ZOOM {
        let (left, right) = if lo.a < hi.a { (lo.a, hi.a) } else { (hi.a, lo.a) };
        let width = right - left;
        if width <= f64::EPSILON * right.max(1e-300) {
            break;
        }
        let guess = if hi.finite() {
            cubic_min(lo.a, lo.f, lo.d, hi.a, hi.f, hi.d)
        } else {
            None
        };
        let safe = (left + 0.1 * width, right - 0.1 * width);
        let a = match guess {
            Some(t) if t >= safe.0 && t <= safe.1 => t,
            _ => 0.5 * (lo.a + hi.a),
        };
        let t = evaluate(f, x, dir, a)?;
        evals += 1;
        note(&t, &mut best);
        if !t.finite() || !armijo(&t) || t.f >= lo.f {
            hi = t;
            continue;
        }
        if curvature(&t) {
            return accept(t, evals);
        }
        if t.d * (hi.a - lo.a) >= 0.0 {
            hi = lo;
        }
        lo = t;
    }
    fail(
        format!(
            "line search interval collapsed without a strong Wolfe step near {:e}",
            lo.a
        ),
        best,
        evals,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::FnFunction;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn exact_minimizer_of_a_parabola_is_accepted() {
        // phi(t) = t^2/2 - t along d = 1 from x = 0.
        let f = FnFunction::new(|x| 0.5 * x[0] * x[0] - x[0], |x| v(&[x[0] - 1.0]));
        let step = line_search_wolfe(&f, &v(&[0.0]), &v(&[1.0]), &SolveConfig::default()).unwrap();
        assert_eq!(step.alpha, 1.0);
        assert_eq!(step.evaluations, 1);
    }

    #[test]
    fn unit_step_satisfying_wolfe_costs_one_evaluation() {
        let f = FnFunction::new(|x| x.norm_squared(), |x| x * 2.0);
        let x = v(&[1.0, -2.0]);
        let d = -&x * 0.9;
        let step = line_search_wolfe(&f, &x, &d, &SolveConfig::default()).unwrap();
        assert_eq!(step.alpha, 1.0);
        assert_eq!(step.evaluations, 1);
    }

    #[test]
    fn ascent_direction_is_rejected() {
        let f = FnFunction::new(|x| x.norm_squared(), |x| x * 2.0);
        let x = v(&[1.0]);
        let err = line_search_wolfe(&f, &x, &v(&[1.0]), &SolveConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn unbounded_direction_stagnates() {
        let f = FnFunction::new(|x| -x[0], |_| v(&[-1.0]));
        let err = line_search_wolfe(&f, &v(&[0.0]), &v(&[1.0]), &SolveConfig::default()).unwrap_err();
        match err {
            Error::Stagnation { report, .. } => assert!(report.fval < -1e3, "{}", report.fval),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overflowing_trial_points_are_shortened() {
        // Finite only on (-1, 1).
        let f = FnFunction::new(
            |x| {
                if x[0].abs() < 1.0 {
                    -(1.0 - x[0] * x[0]).ln() - x[0]
                } else {
                    f64::NAN
                }
            },
            |x| v(&[2.0 * x[0] / (1.0 - x[0] * x[0]) - 1.0]),
        );
        let step = line_search_wolfe(&f, &v(&[0.0]), &v(&[10.0]), &SolveConfig::default()).unwrap();
        assert!(step.fval.is_finite() && step.fval < 0.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            // phi(t) = a t^4 + b t^2 - c t + e sin(w t) with phi'(0) < 0.
            #[test]
            fn returned_step_satisfies_strong_wolfe(
                a in 0.01f64..2.0, b in -1.0f64..2.0, c in 0.5f64..5.0,
                e in 0.0f64..0.3, w in 0.5f64..4.0,
            ) {
                prop_assume!(-c + e * w < 0.0);
                let phi = move |t: f64| a * t.powi(4) + b * t * t - c * t + e * (w * t).sin();
                let dphi = move |t: f64| 4.0 * a * t.powi(3) + 2.0 * b * t - c + e * w * (w * t).cos();
                let f = FnFunction::new(move |x| phi(x[0]), move |x| v(&[dphi(x[0])]));
                let cfg = SolveConfig::default();
                let step = line_search_wolfe(&f, &v(&[0.0]), &v(&[1.0]), &cfg).unwrap();
                let t = step.alpha;
                prop_assert!(phi(t) <= phi(0.0) + cfg.c1 * t * dphi(0.0));
                prop_assert!(dphi(t).abs() <= -cfg.c2 * dphi(0.0));
            }
        }
    }
}
