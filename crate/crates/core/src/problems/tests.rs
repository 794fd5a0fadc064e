use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::cdf::{riemannian_grad, CdfInstance};
use crate::linalg::as_matrix;

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

/// Top-`s` generalized eigenvalues by block iteration on `B^-1 (A + sigma B)`
/// with B-orthonormalization and a Rayleigh-Ritz step.
fn subspace_iteration(a: &DMatrix<f64>, b: &DMatrix<f64>, s: usize, iters: usize) -> f64 {
    let m = a.nrows();
    let sigma = a.norm() + 1.0;
    let shifted = a + b * sigma;
    let lu = b.clone().lu();
    let mut z = DMatrix::from_fn(m, s, |i, j| {
        ((i * 7 + j * 13) % 11) as f64 - 5.0 + if i == j { 10.0 } else { 0.0 }
    });
    for _ in 0..iters {
        z = lu.solve(&(&shifted * &z)).unwrap();
        // B-orthonormalize through the Cholesky factor of Z^T B Z.
        let gram = z.transpose() * b * &z;
        let l = gram.cholesky().unwrap().l();
        z = l.solve_lower_triangular(&z.transpose()).unwrap().transpose();
    }
    let small = z.transpose() * a * &z;
    let small = (&small + small.transpose()) * 0.5;
    small.symmetric_eigen().eigenvalues.sum()
}

#[test]
fn nsm_examples() {
    let p = nsm_problem(3, 1, 4).unwrap();
    assert_eq!(p.spec.shape(), (6, 2));
    let obj = p.objective.clone();
    let w = obj.gradient(&DVector::zeros(12)) * -1.0;
    assert!((w.norm() - 1.0).abs() < 1e-15);
    assert_eq!(obj.value(&w), 0.0);
    assert_eq!(obj.gradient(&w).norm(), 0.0);
    let d = v(&[1.0; 12]);
    assert_eq!(obj.hess_vec(&w, &d).unwrap(), d);
    assert!(nsm_problem(2, 3, 0).is_err());
    assert!(nsm_problem(2, 0, 0).is_err());
}

#[test]
fn problems_are_deterministic() {
    let a = nsm_problem(4, 2, 11).unwrap();
    let b = nsm_problem(4, 2, 11).unwrap();
    let x = DVector::from_element(32, 0.3);
    assert_eq!(a.objective.gradient(&x), b.objective.gradient(&x));
    assert_eq!(a.initial_point().unwrap(), b.initial_point().unwrap());
    assert_ne!(
        nsm_problem(4, 2, 12).unwrap().objective.gradient(&x),
        a.objective.gradient(&x)
    );

    let g1 = geneig_problem(20, 2, 0.2, 3).unwrap();
    let g2 = geneig_problem(20, 2, 0.2, 3).unwrap();
    assert_eq!(g1.pencil().unwrap(), g2.pencil().unwrap());
    assert_eq!(g1.known_optimum.unwrap().to_bits(), g2.known_optimum.unwrap().to_bits());

    let n1 = ncm_problem(6, 2, 0.3, 5).unwrap();
    let n2 = ncm_problem(6, 2, 0.3, 5).unwrap();
    let y = n1.initial_point().unwrap();
    assert_eq!(n1.objective.value(&y).to_bits(), n2.objective.value(&y).to_bits());
}

#[test]
fn geneig_structure() {
    assert!(matches!(geneig_problem(5, 5, 0.1, 0), Err(Error::Argument(_))));
    assert!(geneig_problem(5, 2, 0.0, 0).is_err());
    assert!(geneig_problem(5, 2, 1.5, 0).is_err());

    let p = geneig_problem(40, 3, 0.1, 2).unwrap();
    let (a, b) = p.pencil().unwrap();
    assert!((&a - a.transpose()).norm() == 0.0 && (&b - b.transpose()).norm() == 0.0);
    let ea = a.clone().symmetric_eigen().eigenvalues;
    assert!((ea.iter().fold(0.0f64, |m, v| m.max(v.abs())) - 1.0).abs() < 1e-12);
    let eb = b.clone().symmetric_eigen().eigenvalues;
    assert!(eb.min() >= 0.1 - 1e-12 && eb.max() <= 2.1 + 1e-12);

    // Trace expansion at a B-orthonormal point.
    let x = p.initial_point().unwrap();
    let xm = as_matrix(&x, 40, 3);
    assert!((xm.transpose() * &b * &xm - DMatrix::identity(3, 3)).norm() < 1e-10);
    let expanded: f64 = xm.column_iter().map(|c| -0.5 * c.dot(&(&a * c))).sum();
    assert!((p.objective.value(&x) - expanded).abs() < 1e-13);
    let d = DVector::from_fn(120, |i, _| (i as f64).sin());
    let want = -(&a * as_matrix(&d, 40, 3));
    assert!((as_matrix(&p.objective.hess_vec(&x, &d).unwrap(), 40, 3) - want).norm() < 1e-12);

    // No feasible point beats the oracle optimum.
    let opt = p.known_optimum.unwrap();
    let mut rng = stream(9, 9);
    for _ in 0..20 {
        let y = p.spec.sample_feasible(&mut rng).unwrap();
        assert!(p.objective.value(&y) >= opt - 1e-10);
    }
}

#[test]
fn sparse_matrix_matches_dense() {
    let mut rng = stream(1, 0);
    let c = CooMatrix::random_symmetric(&mut rng, 12, 0.3);
    let x = gaussian_matrix(&mut rng, 12, 3);
    assert!((c.mul(&x) - c.to_dense() * &x).norm() < 1e-13);
    let shifted = c.clone().scaled(2.0).shifted(1.0);
    assert!((shifted.to_dense() - (c.to_dense() * 2.0 + DMatrix::identity(12, 12))).norm() < 1e-14);
    assert!(c.nnz() > 0);
}

#[test]
fn dense_oracle_examples() {
    let mut rng = stream(2, 0);
    let b = {
        let g = gaussian_matrix(&mut rng, 6, 6);
        &g * g.transpose() + DMatrix::identity(6, 6)
    };
    assert!((geneig_dense_oracle(&b, &b, 4).unwrap() - 4.0).abs() < 1e-12);

    let a = DMatrix::from_diagonal(&DVector::from_fn(7, |i, _| (i + 1) as f64));
    assert_eq!(
        geneig_dense_oracle(&a, &DMatrix::identity(7, 7), 3).unwrap(),
        7.0 + 6.0 + 5.0
    );

    let not_pd = -DMatrix::<f64>::identity(3, 3);
    assert!(matches!(
        geneig_dense_oracle(&DMatrix::identity(3, 3), &not_pd, 1),
        Err(Error::Argument(_))
    ));
    assert!(geneig_dense_oracle(&a, &DMatrix::identity(7, 7), 8).is_err());
}

#[test]
fn dense_oracle_agrees_with_subspace_iteration() {
    let mut rng = stream(3, 0);
    let g = gaussian_matrix(&mut rng, 20, 20);
    let a = (&g + g.transpose()) * 0.5;
    let h = gaussian_matrix(&mut rng, 20, 20);
    let b = &h * h.transpose() / 20.0 + DMatrix::identity(20, 20);
    for s in [1, 3, 5] {
        let oracle = geneig_dense_oracle(&a, &b, s).unwrap();
        let iterate = subspace_iteration(&a, &b, s, 3000);
        assert!((oracle - iterate).abs() < 1e-8, "s = {s}: {oracle} vs {iterate}");
    }
}

#[test]
fn ncm_examples() {
    let m = 6;
    // Exact recovery: G built from a unit-row factor of rank s.
    let mut rng = stream(4, 0);
    let mut x = gaussian_matrix(&mut rng, m, 2);
    for mut r in x.row_iter_mut() {
        r.normalize_mut();
    }
    let g = &x * x.transpose();
    let p = ncm_problem_with(g.clone(), DMatrix::from_element(m, m, 1.0), 2, 0).unwrap();
    let y = flatten(x.transpose());
    assert!(p.spec.feasibility(&y).unwrap() < 1e-14);
    assert!(p.objective.value(&y) < 1e-28);
    assert!(p.objective.gradient(&y).norm() < 1e-14);

    // Zero weights kill everything.
    let p0 = ncm_problem_with(g, DMatrix::zeros(m, m), 2, 0).unwrap();
    let y = p0.initial_point().unwrap();
    assert_eq!(p0.objective.value(&y), 0.0);
    assert_eq!(p0.objective.gradient(&y).norm(), 0.0);

    assert!(ncm_problem(4, 5, 0.1, 0).is_err());
    assert!(ncm_problem(4, 2, 1.5, 0).is_err());
}

#[test]
fn ncm_start_has_unit_rows() {
    let p = ncm_problem(8, 2, 0.25, 3).unwrap();
    assert_eq!(p.spec.shape(), (2, 8));
    let y = p.initial_point().unwrap();
    for c in as_matrix(&y, 2, 8).column_iter() {
        assert!((c.norm() - 1.0).abs() < 1e-14);
    }
    assert!(p.objective.value(&y) >= 0.0);
}

#[test]
fn every_generated_objective_passes_derivative_checks() {
    let probs = [
        nsm_problem(4, 2, 1).unwrap(),
        geneig_problem(30, 3, 0.1, 1).unwrap(),
        ncm_problem(9, 3, 0.2, 1).unwrap(),
        hyperbola2d_problem().unwrap(),
    ];
    let mut rng = stream(5, 0);
    for p in &probs {
        assert!(p.gradient_check_error(3).unwrap() < 1e-5, "{}", p.name);
        let n = p.spec.dim();
        for _ in 0..3 {
            let x = p.spec.sample_feasible(&mut rng).unwrap() + gaussian_vector(&mut rng, n) * 0.01;
            let d = gaussian_vector(&mut rng, n);
            let hd = p.objective.hess_vec(&x, &d).unwrap();
            let h = 1e-6;
            let fd = (p.objective.gradient(&(&x + &d * h)) - p.objective.gradient(&(&x - &d * h))) / (2.0 * h);
            assert!((&hd - &fd).norm() <= 1e-5 * hd.norm().max(1.0), "{}", p.name);
        }
    }
}

#[test]
fn broken_gradient_is_rejected_in_debug_builds() {
    let obj = crate::cdf::FnObjective::new(|x| x.norm_squared(), |x| x * 3.0);
    let res = ProblemInstance::new("broken", ManifoldSpec::sphere(3).unwrap(), Arc::new(obj), 0);
    assert_eq!(res.is_err(), cfg!(debug_assertions));
}

#[test]
fn hyperbola_examples() {
    let p = hyperbola2d_problem().unwrap();
    assert_eq!(p.spec.operator_apply(&v(&[2.0, 0.0])).unwrap(), v(&[-1.0, 0.0]));
    let w = v(&[1.0, 0.0]);
    assert_eq!(p.objective.value(&w), 1.0);
    for beta in [0.5, 1.0, 7.0] {
        let inst = CdfInstance::new(p.spec.clone(), p.objective.clone(), beta).unwrap();
        assert_eq!(inst.value(&w).unwrap(), 1.0);
    }
    assert_eq!(p.objective.gradient(&w), v(&[0.0, -2.0]));
    assert_eq!(p.spec.constraint_jac_apply(&w, &v(&[1.0])).unwrap(), v(&[2.0, 0.0]));
    let g = riemannian_grad(&p.spec, p.objective.as_ref(), &w).unwrap();
    assert!((g - v(&[0.0, -2.0])).norm() < 1e-15);
}

#[test]
fn dense_matrix_loader() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    std::fs::write(&path, "3\n1 0.5 0\n0.5 1 0.2\n0 0.2 1\n").unwrap();
    let g = load_dense_matrix(&path).unwrap();
    assert_eq!(g[(1, 2)], 0.2);
    assert_eq!(g.shape(), (3, 3));

    let params = ProblemParams {
        s: 2,
        ncm_matrix: Some(path.clone()),
        ..ProblemParams::default()
    };
    let p = build_problem(ProblemKind::Ncm, &params).unwrap();
    assert_eq!(p.spec.shape(), (2, 3));

    for bad in ["", "x\n", "2\n1 2\n", "2\n1 2\n3\n", "2\n1 2\n3 4\n5 6\n", "1\nfoo\n"] {
        std::fs::write(&path, bad).unwrap();
        assert!(matches!(load_dense_matrix(&path), Err(Error::Argument(_))), "{bad:?}");
    }
    assert!(matches!(
        load_dense_matrix(&dir.path().join("missing")),
        Err(Error::Io(_))
    ));
}

#[test]
fn problem_kind_names_roundtrip() {
    for k in ProblemKind::ALL {
        assert_eq!(ProblemKind::from_name(k.name()), Some(k));
    }
    assert_eq!(ProblemKind::from_name("rosenbrock"), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn nsm_objective_is_nonnegative(seed in 0u64..1000, scale in 0.0f64..10.0) {
        let p = nsm_problem(3, 1, seed).unwrap();
        let x = gaussian_vector(&mut stream(seed, 7), 12) * scale;
        prop_assert!(p.objective.value(&x) >= 0.0);
    }

    #[test]
    fn geneig_values_respect_the_oracle_bound(seed in 0u64..200) {
        let p = geneig_problem(15, 2, 0.3, seed).unwrap();
        let opt = p.known_optimum.unwrap();
        let y = p.spec.sample_feasible(&mut stream(seed, 8)).unwrap();
        prop_assert!(p.objective.value(&y) >= opt - 1e-10);
    }
}
