use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::suite::{check_rng, random_quadratic};
use super::*;
use crate::cdf::{CdfInstance, FnObjective, Objective};
use crate::manifolds::{ManifoldKind, ManifoldSpec};
use crate::problems::{geneig_problem, hyperbola2d_problem, nsm_problem};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

#[test]
fn operator_axioms_pass_on_stiefel_and_symplectic() {
    let r = check_operator_axioms(&ManifoldSpec::stiefel(6, 3).unwrap(), 20, 1e-8, &mut rng(1)).unwrap();
    assert!(r.pass, "{r:?}");
    assert_eq!(r.n, 20);
    assert_eq!(r.measures.len(), 4);
    let r = check_operator_axioms(&ManifoldSpec::symplectic_stiefel(4, 2).unwrap(), 20, 1e-8, &mut rng(2)).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn broken_operator_fails_the_fixed_point_axiom() {
    let eps = 1e-6;
    let spec = ManifoldSpec::stiefel(6, 3).unwrap().with_operator_offset(eps);
    let r = check_operator_axioms(&spec, 5, 1e-8, &mut rng(3)).unwrap();
    assert!(!r.pass);
    let fixed = r.measure("fixed_point").unwrap();
    assert!(!fixed.pass());
    // Stiefel points have norm sqrt(3); the raw residual is eps * sqrt(18).
    let raw = fixed.value * (1.0 + 3f64.sqrt());
    assert!((raw - eps * 18f64.sqrt()).abs() < 1e-12, "{raw}");
    assert_eq!(r.worst, fixed.value);
}

#[test]
fn generic_without_sampler_is_a_capability_error() {
    struct Plane;
    impl crate::manifolds::ConstraintMap for Plane {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
            v(&[x[0]])
        }
        fn jac_apply(&self, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
            let mut out = DVector::zeros(x.len());
            out[0] = w[0];
            out
        }
        fn jac_adjoint_apply(&self, _x: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
            v(&[d[0]])
        }
    }
    let spec = ManifoldSpec::generic(Arc::new(Plane), 3, 1.0).unwrap();
    let err = check_operator_axioms(&spec, 3, 1e-8, &mut rng(0)).unwrap_err();
    assert!(matches!(err, Error::Capability(_)));
}

#[test]
fn sphere_decrease_has_slope_two() {
    let spec = ManifoldSpec::sphere(5).unwrap();
    let r = check_quadratic_decrease(&spec, 10, &[1e-1, 1e-2, 1e-3], &mut rng(4)).unwrap();
    assert!(r.pass, "{r:?}");
    let (lo, hi) = (
        r.measure("slope_min").unwrap().value,
        r.measure("slope_max").unwrap().value,
    );
    assert!(lo > 1.9 && hi < 2.1, "{lo} {hi}");

    // c(A(y)) = -c(y)^2 / (1 + |y|^2)^2.
    let y = v(&[0.3, -1.1, 0.4, 0.2, 0.0]);
    let c = spec.constraint_eval(&y).unwrap()[0];
    let ca = spec.constraint_eval(&spec.operator_apply(&y).unwrap()).unwrap()[0];
    assert!((ca + c * c / (1.0 + y.norm_squared()).powi(2)).abs() < 1e-15);
}

#[test]
fn hyperbola_point_lands_exactly_on_the_manifold() {
    let p = hyperbola2d_problem().unwrap();
    let a = p.spec.operator_apply(&v(&[2.0, 0.0])).unwrap();
    assert_eq!(p.spec.feasibility(&a).unwrap(), 0.0);
    let r = check_quadratic_decrease(&p.spec, 10, &[1e-1, 1e-2, 1e-3], &mut rng(5)).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn stiefel_decrease_slopes_lie_in_the_window() {
    let spec = ManifoldSpec::stiefel(6, 3).unwrap();
    let r = check_quadratic_decrease(&spec, 10, &[1e-1, 1e-2, 1e-3], &mut rng(6)).unwrap();
    assert!(r.pass, "{r:?}");
    assert_eq!(r.measure("flagged").unwrap().value, 0.0);
}

#[test]
fn shifted_operator_fails_the_slope_window() {
    // The shift leaves a residual of order eps whatever the distance, which
    // either flattens the fitted slope or makes the residual grow.
    let spec = ManifoldSpec::stiefel(6, 3).unwrap().with_operator_offset(1e-3);
    let r = check_quadratic_decrease(&spec, 5, &[1e-1, 1e-2, 1e-3], &mut rng(7)).unwrap();
    assert!(!r.pass, "{r:?}");
}

#[test]
fn decrease_rejects_bad_scales() {
    let spec = ManifoldSpec::sphere(3).unwrap();
    for scales in [&[1e-1][..], &[1e-2, 1e-1], &[1e-1, 1e-5]] {
        assert!(matches!(
            check_quadratic_decrease(&spec, 2, scales, &mut rng(0)),
            Err(Error::Argument(_))
        ));
    }
}

#[test]
fn gradient_check_examples() {
    let p = hyperbola2d_problem().unwrap();
    let inst = CdfInstance::new(p.spec.clone(), p.objective.clone(), 1.0).unwrap();
    let r = check_gradient_fd(&inst, 6, 1e-6, &mut rng(8)).unwrap();
    assert!(r.pass, "{r:?}");

    let sphere = ManifoldSpec::sphere(6).unwrap();
    let inst = CdfInstance::new(sphere, random_quadratic(&mut rng(9), 6), 3.0).unwrap();
    assert!(check_gradient_fd(&inst, 6, 1e-5, &mut rng(10)).unwrap().pass);
}

/// `grad h` with the penalty term `beta J_c c` left out.
struct DropPenaltyGradient(CdfInstance);

impl SmoothFunction for DropPenaltyGradient {
    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.0.value(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let spec = self.0.spec();
        let c = spec.constraint_eval(x)?;
        Ok(self.0.gradient(x)? - spec.constraint_jac_apply(x, &c)? * self.0.beta())
    }
}

#[test]
fn dropped_penalty_term_is_caught_only_off_the_manifold() {
    let spec = ManifoldSpec::stiefel(5, 2).unwrap();
    let inst = CdfInstance::new(spec.clone(), random_quadratic(&mut rng(11), 10), 2.0).unwrap();
    let r = check_gradient_fd_of(DropPenaltyGradient(inst), &spec, 6, 1e-5, &mut rng(12)).unwrap();
    assert!(!r.pass);
    assert!(r.measure("feasible_rel_err").unwrap().pass());
    assert!(!r.measure("perturbed_rel_err").unwrap().pass());
}

#[test]
fn hessian_check_examples() {
    let p = nsm_problem(3, 1, 0).unwrap();
    let inst = CdfInstance::new(p.spec.clone(), p.objective.clone(), 2.0).unwrap();
    let r = check_hess_fd(&inst, 6, 1e-4, &mut rng(13)).unwrap();
    assert!(r.pass, "{r:?}");
    assert_eq!(r.measure("zero_direction").unwrap().value, 0.0);
    assert!(r.measure("symmetry").unwrap().value <= SYMMETRY_TOL);

    let no_hess: Arc<dyn Objective> = Arc::new(FnObjective::new(|x| x.norm_squared(), |x| x * 2.0));
    let inst = CdfInstance::new(ManifoldSpec::sphere(3).unwrap(), no_hess, 1.0).unwrap();
    assert!(matches!(
        check_hess_fd(&inst, 2, 1e-4, &mut rng(0)),
        Err(Error::Capability(_))
    ));
}

#[test]
fn stationarity_transfer_on_the_hyperbola() {
    let p = hyperbola2d_problem().unwrap();
    let inst = CdfInstance::new(p.spec.clone(), p.objective.clone(), 1.0).unwrap();
    let out = check_stationarity_transfer(&inst, SolverKind::Lbfgs, &v(&[1.0, 0.0]), 1e-8).unwrap();
    assert!(out.report.pass, "{:?}", out.report);
    assert!(out.solve.converged());
    assert!(p.spec.feasibility(&out.x_final).unwrap() <= 1e-12);
}

#[test]
fn stationarity_transfer_on_nsm_with_crm() {
    let p = nsm_problem(10, 2, 0).unwrap();
    let inst = CdfInstance::new(p.spec.clone(), p.objective.clone(), 2.0).unwrap();
    let out = check_stationarity_transfer(&inst, SolverKind::Crm, &p.initial_point().unwrap(), 1e-6).unwrap();
    assert!(out.report.pass, "{:?}", out.report);
}

#[test]
fn stationarity_transfer_on_geneig_matches_the_oracle() {
    let p = geneig_problem(50, 3, 0.05, 0).unwrap();
    let inst = CdfInstance::new(p.spec.clone(), p.objective.clone(), 2.0).unwrap();
    let out = check_stationarity_transfer(&inst, SolverKind::Trncg, &p.initial_point().unwrap(), 1e-7).unwrap();
    assert!(out.report.pass, "{:?}", out.report);
    let opt = p.known_optimum.unwrap();
    assert!((out.fval - opt).abs() <= 1e-6, "{} vs {opt}", out.fval);
}

#[test]
fn reports_serialize_with_the_fixed_keys() {
    let r = CheckReport::from_measures(
        "x/y",
        3,
        vec![
            Measure::new("a", 1e-9, 1e-8),
            Measure::new("b", 0.5, 1.0),
            Measure::new("c", f64::INFINITY, f64::INFINITY),
        ],
    );
    assert!(r.pass);
    assert_eq!((r.worst, r.tol), (0.5, 1.0));
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["n", "name", "pass", "tol", "worst"]);
    assert_eq!(r.to_json(), r#"{"name":"x/y","pass":true,"worst":0.5,"tol":1.0,"n":3}"#);

    let failed = CheckReport::from_measures("z", 0, vec![Measure::new("err", f64::NAN, 0.0)]);
    assert!(!failed.pass);
    assert!(failed.to_json().contains(r#""worst":null"#));

    let mut buf = Vec::new();
    write_json_lines(&mut buf, &[r, failed]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
}

#[test]
fn check_rngs_depend_only_on_seed_and_name() {
    use rand::RngCore;
    assert_eq!(check_rng(3, "a").next_u64(), check_rng(3, "a").next_u64());
    assert_ne!(check_rng(3, "a").next_u64(), check_rng(3, "b").next_u64());
    assert_ne!(check_rng(3, "a").next_u64(), check_rng(4, "a").next_u64());
}

#[test]
fn suite_filter_and_determinism() {
    let cfg = SuiteConfig {
        master_seed: 7,
        kinds: Some(vec![ManifoldKind::SymplecticStiefel]),
        inject_fault: false,
    };
    let a = run_suite(&cfg);
    assert!(!a.is_empty());
    for r in &a {
        assert!(
            r.name.starts_with("symplectic/") || r.name.starts_with("nsm/"),
            "{}",
            r.name
        );
        assert!(r.pass, "{r:?}");
    }
    let b = run_suite(&cfg);
    let ja: Vec<String> = a.iter().map(CheckReport::to_json).collect();
    let jb: Vec<String> = b.iter().map(CheckReport::to_json).collect();
    assert_eq!(ja, jb);
}

#[test]
fn suite_with_fault_injection_fails_operator_checks() {
    let cfg = SuiteConfig {
        master_seed: 0,
        kinds: Some(vec![ManifoldKind::Sphere, ManifoldKind::Stiefel]),
        inject_fault: true,
    };
    let reports = run_suite(&cfg);
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    assert!(failed.contains(&"sphere/operator_axioms"), "{failed:?}");
    assert!(failed.contains(&"stiefel/operator_axioms"), "{failed:?}");
}

#[test]
fn catalog_covers_every_kind() {
    let cat = catalog(0);
    for kind in ManifoldKind::ALL {
        assert!(cat.iter().any(|e| e.spec.kind() == kind), "{kind}");
    }
    let labels: std::collections::HashSet<&str> = cat.iter().map(|e| e.label).collect();
    assert_eq!(labels.len(), cat.len());
}
