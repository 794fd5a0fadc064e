use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::manifolds::{gaussian_matrix, gaussian_vector, ManifoldSpec};

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn hyperbola() -> ManifoldSpec {
    ManifoldSpec::hyperbolic(DMatrix::from_diagonal(&v(&[1.0, -1.0])), 1).unwrap()
}

fn hyperbola_objective() -> Arc<dyn Objective> {
    let t = v(&[1.0, 1.0]);
    let t2 = t.clone();
    Arc::new(FnObjective::new(move |w| (w - &t).norm_squared(), move |w| (w - &t2) * 2.0).with_hess_vec(|_, d| d * 2.0))
}

/// `1/2 x^T Q x + b^T x` with random symmetric `Q`.
fn random_quadratic(r: &mut ChaCha8Rng, n: usize) -> Arc<dyn Objective> {
    let g = gaussian_matrix(r, n, n);
    let q = (&g + g.transpose()) * 0.5;
    let b = gaussian_vector(r, n);
    let (q1, q2, b1) = (q.clone(), q.clone(), b.clone());
    Arc::new(
        FnObjective::new(move |x| 0.5 * x.dot(&(&q * x)) + b.dot(x), move |x| &q1 * x + &b1)
            .with_hess_vec(move |_, d| &q2 * d),
    )
}

fn linear(a: DVector<f64>) -> Arc<dyn Objective> {
    let a2 = a.clone();
    Arc::new(FnObjective::new(move |x| a.dot(x), move |_| a2.clone()).with_hess_vec(|_, d| d * 0.0))
}

fn constant(n: usize) -> Arc<dyn Objective> {
    Arc::new(FnObjective::new(|_| 1.5, move |_| DVector::zeros(n)).with_hess_vec(|_, d| d * 0.0))
}

fn specs(r: &mut ChaCha8Rng) -> Vec<ManifoldSpec> {
    let g = gaussian_matrix(r, 5, 5);
    let b = &g * g.transpose() / 5.0 + DMatrix::identity(5, 5);
    vec![
        ManifoldSpec::sphere(4).unwrap(),
        ManifoldSpec::oblique(3, 2).unwrap(),
        ManifoldSpec::stiefel(4, 2).unwrap(),
        ManifoldSpec::generalized_stiefel(b, 2).unwrap(),
        hyperbola(),
        ManifoldSpec::symplectic_stiefel(3, 1).unwrap(),
    ]
}

fn fd_grad(inst: &CdfInstance, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
    let h = 1e-6;
    (inst.value(&(x + d * h)).unwrap() - inst.value(&(x - d * h)).unwrap()) / (2.0 * h)
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

#[test]
fn hyperbola_values() {
    let inst = CdfInstance::new(hyperbola(), hyperbola_objective(), 1.0).unwrap();
    assert_eq!(inst.value(&v(&[1.0, 0.0])).unwrap(), 1.0);
    assert_eq!(inst.value(&v(&[2.0, 0.0])).unwrap(), 9.5);
    assert_eq!(inst.spec().operator_apply(&v(&[2.0, 0.0])).unwrap(), v(&[-1.0, 0.0]));
}

#[test]
fn value_equals_objective_on_the_manifold() {
    let mut r = rng(1);
    for spec in specs(&mut r) {
        let n = spec.dim();
        let obj = random_quadratic(&mut r, n);
        let inst = CdfInstance::new(spec.clone(), obj.clone(), 3.0).unwrap();
        let x = spec.sample_feasible(&mut r).unwrap();
        let (h, f) = (inst.value(&x).unwrap(), obj.value(&x));
        assert!((h - f).abs() <= 1e-10 * f.abs().max(1.0), "{:?}", spec.kind());
    }
}

#[test]
fn invalid_beta_is_rejected() {
    for beta in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(CdfInstance::new(hyperbola(), hyperbola_objective(), beta).is_err());
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let inst = CdfInstance::new(hyperbola(), hyperbola_objective(), 1.0).unwrap();
    let w = v(&[1.5, 0.2]);
    let g = inst.gradient(&w).unwrap();
    for d in [v(&[1.0, 0.0]), v(&[0.0, 1.0])] {
        let num = fd_grad(&inst, &w, &d);
        assert!((g.dot(&d) - num).abs() <= 1e-6 * num.abs().max(1.0));
    }

    let mut r = rng(2);
    for spec in specs(&mut r) {
        let n = spec.dim();
        let inst = CdfInstance::new(spec.clone(), random_quadratic(&mut r, n), 2.0).unwrap();
        let x = spec.sample_feasible(&mut r).unwrap() + gaussian_vector(&mut r, n) * 0.1;
        let g = inst.gradient(&x).unwrap();
        let num = DVector::from_fn(n, |i, _| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            fd_grad(&inst, &x, &e)
        });
        assert!(rel(&g, &num) <= 1e-5, "{:?}: {}", spec.kind(), rel(&g, &num));
    }
}

#[test]
fn gradient_is_affine_in_beta() {
    let mut r = rng(3);
    let spec = ManifoldSpec::stiefel(4, 2).unwrap();
    let inst = CdfInstance::new(spec.clone(), random_quadratic(&mut r, 8), 1.0).unwrap();
    let other = inst.with_beta(4.5).unwrap();
    let x = gaussian_vector(&mut r, 8);
    let c = spec.constraint_eval(&x).unwrap();
    let jc = spec.constraint_jac_apply(&x, &c).unwrap();
    let diff = other.gradient(&x).unwrap() - inst.gradient(&x).unwrap();
    assert!(rel(&diff, &(jc * 3.5)) <= 1e-13);
    let dv = other.value(&x).unwrap() - inst.value(&x).unwrap();
    assert!((dv - 3.5 * 0.5 * c.norm_squared()).abs() <= 1e-12 * dv.abs().max(1.0));
}

#[test]
fn hessian_matches_finite_differences_and_is_symmetric() {
    let mut r = rng(4);
    for spec in specs(&mut r) {
        let n = spec.dim();
        let inst = CdfInstance::new(spec.clone(), random_quadratic(&mut r, n), 2.0).unwrap();
        let x = spec.sample_feasible(&mut r).unwrap() + gaussian_vector(&mut r, n) * 0.1;
        let d = gaussian_vector(&mut r, n);
        let e = gaussian_vector(&mut r, n);
        let hd = inst.hess_vec(&x, &d).unwrap();
        let fd = inst
            .clone()
            .with_hess_mode(HessMode::FiniteDifference)
            .hess_vec(&x, &d)
            .unwrap();
        assert!(rel(&hd, &fd) <= 1e-5, "{:?}: {}", spec.kind(), rel(&hd, &fd));
        let he = inst.hess_vec(&x, &e).unwrap();
        let (a, b) = (hd.dot(&e), d.dot(&he));
        assert!(
            (a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1.0),
            "{:?}",
            spec.kind()
        );
        assert_eq!(inst.hess_vec(&x, &DVector::zeros(n)).unwrap().norm(), 0.0);
    }
}

#[test]
fn missing_hessian_is_a_capability_error() {
    let obj: Arc<dyn Objective> = Arc::new(FnObjective::new(|x| x.norm_squared(), |x| x * 2.0));
    let inst = CdfInstance::new(ManifoldSpec::sphere(3).unwrap(), obj, 1.0).unwrap();
    let x = v(&[1.0, 0.5, 0.0]);
    assert!(matches!(inst.hess_vec(&x, &x), Err(Error::Capability(_))));
    assert!(!inst.has_second_order());
    let fd = inst.with_hess_mode(HessMode::FiniteDifference);
    assert!(fd.has_second_order());
    assert!(fd.hess_vec(&x, &x).is_ok());
}

#[test]
fn post_processing_examples() {
    let (x, k) = post_process(&hyperbola(), &v(&[2.0, 0.0]), 1e-12, 10).unwrap();
    assert_eq!((x, k), (v(&[-1.0, 0.0]), 1));

    let sphere = ManifoldSpec::sphere(2).unwrap();
    let r = post_process_traced(&sphere, &v(&[2.0, 0.0]), 1e-12, 10).unwrap();
    assert!(r.iterations <= 5, "{:?}", r.trace);
    assert!((&r.x - v(&[1.0, 0.0])).norm() < 1e-12);
    assert!((r.trace[1] - 0.36).abs() < 1e-15);

    let feasible = v(&[0.6, 0.8]);
    assert_eq!(post_process(&sphere, &feasible, 1e-12, 10).unwrap(), (feasible, 0));
}

#[test]
fn post_processing_failures_carry_the_trace() {
    match post_process(&ManifoldSpec::sphere(2).unwrap(), &v(&[2.0, 0.0]), 1e-12, 2) {
        Err(Error::NonConvergence { trace }) => assert_eq!(trace.len(), 3),
        other => panic!("unexpected {other:?}"),
    }
    // On the wrong branch of the hyperbola the residual grows without bound.
    match post_process(&hyperbola(), &v(&[0.0, 3.0]), 1e-12, 50) {
        Err(Error::Divergence { trace }) => assert!(trace.len() >= 3 && trace[2] > trace[1]),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(
        post_process(&hyperbola(), &v(&[1.0, 0.0]), 0.0, 5),
        Err(Error::Argument(_))
    ));
}

#[test]
fn beta_estimate_basics() {
    let spec = ManifoldSpec::stiefel(4, 2).unwrap();
    let mut r = rng(5);
    let x = spec.sample_feasible(&mut r).unwrap();
    let cfg = PenaltyConfig::default();
    assert_eq!(
        estimate_beta(&spec, constant(8).as_ref(), &x, &cfg, &mut rng(9)).unwrap(),
        0.0
    );

    let obj = random_quadratic(&mut r, 8);
    let a = estimate_beta(&spec, obj.as_ref(), &x, &cfg, &mut rng(9)).unwrap();
    let b = estimate_beta(&spec, obj.as_ref(), &x, &cfg, &mut rng(9)).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    assert!(a.is_finite() && a >= 0.0);

    let err = estimate_beta(&spec, obj.as_ref(), &(&x * 1.5), &cfg, &mut rng(9)).unwrap_err();
    assert!(matches!(err, Error::Infeasible { .. }));
    let bad = PenaltyConfig { safety: 0.5, ..cfg };
    assert!(estimate_beta(&spec, obj.as_ref(), &x, &bad, &mut rng(9)).is_err());
}

#[test]
fn ball_samples_stay_in_the_ball() {
    let mut r = rng(6);
    let c = v(&[1.0, 2.0, 3.0]);
    for _ in 0..200 {
        assert!((sample_ball(&mut r, &c, 0.7) - &c).norm() <= 0.7);
    }
}

#[test]
fn multiplier_examples() {
    let sphere = ManifoldSpec::sphere(3).unwrap();
    let a = v(&[0.3, -1.0, 2.0]);
    let x = v(&[0.0, 0.6, 0.8]);
    let lam = multiplier(&sphere, linear(a.clone()).as_ref(), &x).unwrap();
    assert!((lam[0] - x.dot(&a) / 2.0).abs() < 1e-15);

    // Gradient already normal: zero residual.
    let lam = multiplier(&sphere, linear(&x * 3.0).as_ref(), &x).unwrap();
    let res = &x * 3.0 - sphere.constraint_jac_apply(&x, &lam).unwrap();
    assert!(res.norm() < 1e-15);

    // Dense pseudo-inverse oracle on Stiefel.
    let mut r = rng(7);
    let st = ManifoldSpec::stiefel(6, 3).unwrap();
    let x = st.sample_feasible(&mut r).unwrap();
    let obj = random_quadratic(&mut r, 18);
    let jac = st.constraint_jacobian(&x).unwrap();
    let pinv = jac.clone().pseudo_inverse(1e-14).unwrap();
    let oracle = pinv * obj.gradient(&x);
    assert!(rel(&multiplier(&st, obj.as_ref(), &x).unwrap(), &oracle) < 1e-10);
}

#[test]
fn riemannian_gradient_examples() {
    let sphere = ManifoldSpec::sphere(3).unwrap();
    let e1 = v(&[1.0, 0.0, 0.0]);
    let e2 = v(&[0.0, 1.0, 0.0]);
    let g = riemannian_grad(&sphere, linear(e2.clone()).as_ref(), &e1).unwrap();
    assert!((g - &e2).norm() < 1e-15);
    let g = riemannian_grad(&sphere, linear(e1.clone()).as_ref(), &e1).unwrap();
    assert!(g.norm() < 1e-15);

    let mut r = rng(8);
    for spec in specs(&mut r) {
        let n = spec.dim();
        let obj = random_quadratic(&mut r, n);
        let x = spec.sample_feasible(&mut r).unwrap();
        let g = riemannian_grad(&spec, obj.as_ref(), &x).unwrap();
        let u = spec.tangent_basis(&x).unwrap();
        let oracle = &u * (u.transpose() * obj.gradient(&x));
        assert!(
            (&g - &oracle).norm() <= 1e-8 * oracle.norm().max(1.0),
            "{:?}",
            spec.kind()
        );
        let normal = spec.constraint_jac_adjoint_apply(&x, &g).unwrap();
        assert!(
            normal.norm() <= 1e-8 * g.norm().max(1e-300) + 1e-12,
            "{:?}",
            spec.kind()
        );
    }
}

#[test]
fn projected_hessian_examples() {
    let sphere = ManifoldSpec::sphere(3).unwrap();
    let dg = v(&[0.5, 2.0, -1.0]);
    let d2 = dg.clone();
    let obj: Arc<dyn Objective> = Arc::new(
        FnObjective::new(
            move |x| 0.5 * x.dot(&x.component_mul(&dg)),
            move |x| x.component_mul(&d2),
        )
        .with_hess_vec({
            let d3 = v(&[0.5, 2.0, -1.0]);
            move |_, d| d.component_mul(&d3)
        }),
    );
    let ph = projected_hessian(&sphere, obj.as_ref(), &v(&[1.0, 0.0, 0.0])).unwrap();
    let want = [-1.5, 1.5];
    for (got, want) in ph.eigenvalues.iter().zip(want) {
        assert!((got - want).abs() < 1e-12, "{:?}", ph.eigenvalues);
    }
    assert_eq!(ph.min_eigenvalue(), ph.eigenvalues[0]);

    let ph = projected_hessian(&sphere, constant(3).as_ref(), &v(&[0.0, 0.0, 1.0])).unwrap();
    assert_eq!(ph.matrix.norm(), 0.0);

    let no_hess: Arc<dyn Objective> = Arc::new(FnObjective::new(|x| x[0], |x| DVector::zeros(x.len())));
    assert!(matches!(
        projected_hessian(&sphere, no_hess.as_ref(), &v(&[1.0, 0.0, 0.0])),
        Err(Error::Capability(_))
    ));
}

#[test]
fn projected_hessian_matches_finite_difference_assembly() {
    let mut r = rng(10);
    for spec in specs(&mut r) {
        let n = spec.dim();
        let obj = random_quadratic(&mut r, n);
        let x = spec.sample_feasible(&mut r).unwrap();
        let ph = projected_hessian(&spec, obj.as_ref(), &x).unwrap();
        let u = spec.tangent_basis(&x).unwrap();
        let lambda = multiplier(&spec, obj.as_ref(), &x).unwrap();
        // Gradient of the Lagrangian with lambda frozen.
        let lag = |z: &DVector<f64>| obj.gradient(z) - spec.constraint_jac_apply(z, &lambda).unwrap();
        let h = 1e-5;
        let mut m = DMatrix::zeros(n, u.ncols());
        for j in 0..u.ncols() {
            let uj: DVector<f64> = u.column(j).into_owned();
            m.set_column(j, &((lag(&(&x + &uj * h)) - lag(&(&x - &uj * h))) / (2.0 * h)));
        }
        let oracle = u.transpose() * m;
        let err = (&ph.matrix - &oracle).norm() / oracle.norm().max(1.0);
        assert!(err < 1e-4, "{:?}: {err}", spec.kind());
        assert!((&ph.matrix - ph.matrix.transpose()).norm() <= 1e-8);
    }
}

#[test]
fn operator_step_does_not_increase_h_near_the_manifold() {
    let mut r = rng(11);
    for spec in specs(&mut r) {
        let n = spec.dim();
        let obj = random_quadratic(&mut r, n);
        let x = spec.sample_feasible(&mut r).unwrap();
        let beta = estimate_beta(
            &spec,
            obj.as_ref(),
            &x,
            &PenaltyConfig {
                radius: 0.1,
                ..PenaltyConfig::default()
            },
            &mut r,
        )
        .unwrap()
        .max(1.0);
        let inst = CdfInstance::new(spec.clone(), obj, beta).unwrap();
        for _ in 0..5 {
            let y = &x + gaussian_vector(&mut r, n) * (1e-3 * (1.0 + x.norm()));
            let ay = spec.operator_apply(&y).unwrap();
            assert!(inst.value(&ay).unwrap() <= inst.value(&y).unwrap(), "{:?}", spec.kind());
        }
    }
}

#[test]
fn gradient_norm_controls_infeasibility() {
    let mut r = rng(12);
    for spec in specs(&mut r) {
        let n = spec.dim();
        let inst = CdfInstance::new(spec.clone(), random_quadratic(&mut r, n), 10.0).unwrap();
        let x = spec.sample_feasible(&mut r).unwrap();
        let w = gaussian_vector(&mut r, spec.constraint_dim());
        let normal = spec.constraint_jac_apply(&x, &w).unwrap().normalize();
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|t| {
                let y = &x + &normal * *t;
                inst.gradient(&y).unwrap().norm() / spec.feasibility(&y).unwrap()
            })
            .collect();
        let floor = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(floor > 1e-2, "{:?}: {ratios:?}", spec.kind());
    }
}
