use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    check_gradient_fd, check_hess_fd, check_operator_axioms, check_quadratic_decrease, check_stationarity_transfer,
    CheckReport, Measure,
};
use crate::cdf::{CdfInstance, FnObjective, Objective};
use crate::error::Result;
use crate::linalg::symplectic_form;
use crate::manifolds::{
    gaussian_matrix, gaussian_vector, ManifoldKind, ManifoldSpec, Sign, SphereConstraint, DEFAULT_ALPHA,
};
use crate::problems::{geneig_problem, hyperbola2d_problem, ncm_problem, nsm_problem, ProblemInstance};
use crate::solvers::SolverKind;

/// Offset added to every operator when fault injection is on.
pub const FAULT_OFFSET: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub master_seed: u64,
    /// Restrict to these kinds; `None` runs everything.
    pub kinds: Option<Vec<ManifoldKind>>,
    /// Shift every catalog operator by [`FAULT_OFFSET`], which must make the
    /// operator checks fail.
    pub inject_fault: bool,
}

#[allow(clippy::derivable_impls)] // the fault flag follows the build feature
impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            master_seed: 0,
            kinds: None,
            inject_fault: cfg!(feature = "fault-injection"),
        }
    }
}

impl SuiteConfig {
    fn selected(&self, kind: ManifoldKind) -> bool {
        self.kinds.as_ref().is_none_or(|ks| ks.contains(&kind))
    }
}

/// A labelled manifold of the default catalog.
#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub label: &'static str,
    pub spec: ManifoldSpec,
}

/// 64-bit FNV-1a, used to derive a stable per-check seed from its name.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// RNG owned by the check called `name`.
pub(crate) fn check_rng(master_seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(master_seed ^ fnv1a(name))
}

fn random_spd(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, m, m);
    &g * g.transpose() / m as f64 + DMatrix::identity(m, m)
}

/// Symmetric matrix with `negatives` negative eigenvalues and the rest positive.
fn random_indefinite(rng: &mut ChaCha8Rng, m: usize, negatives: usize) -> DMatrix<f64> {
    let q = gaussian_matrix(rng, m, m).qr().q();
    let d = DMatrix::from_fn(m, m, |i, j| match (i == j, i < negatives) {
        (false, _) => 0.0,
        (true, true) => -1.0 - i as f64 * 0.25,
        (true, false) => 1.0 + i as f64 * 0.25,
    });
    let b = &q * d * q.transpose();
    (&b + b.transpose()) * 0.5
}

/// Symmetric involution `Q D Q^T` with `D = diag(+-1)`.
fn random_reflection(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let q = gaussian_matrix(rng, m, m).qr().q();
    let d = DMatrix::from_fn(m, m, |i, j| {
        if i != j {
            0.0
        } else if i < m / 2 {
            -1.0
        } else {
            1.0
        }
    });
    let r = &q * d * q.transpose();
    (&r + r.transpose()) * 0.5
}

/// Default manifolds: sphere 10, oblique 8x4, Stiefel, generalized Stiefel and
/// Grassmann 10x4, hyperbolic 6x2, symplectic Stiefel 8x4, the quadratic Lie
/// groups of order 6 for both signs and the sphere wrapped as a generic
/// constraint. Structure matrices are drawn from `seed`.
pub fn catalog(seed: u64) -> Vec<SuiteEntry> {
    let mut rng = check_rng(seed, "catalog");
    let spd = random_spd(&mut rng, 10);
    let indefinite = random_indefinite(&mut rng, 6, 2);
    let reflection = random_reflection(&mut rng, 6);
    let entries = [
        ("sphere", ManifoldSpec::sphere(10)),
        ("oblique", ManifoldSpec::oblique(8, 4)),
        ("stiefel", ManifoldSpec::stiefel(10, 4)),
        ("generalized_stiefel", ManifoldSpec::generalized_stiefel(spd, 4)),
        ("grassmann", ManifoldSpec::grassmann(10, 4)),
        ("hyperbolic", ManifoldSpec::hyperbolic(indefinite, 2)),
        ("symplectic", ManifoldSpec::symplectic_stiefel(4, 2)),
        (
            "lie_group_plus",
            ManifoldSpec::quadratic_lie_group(reflection, Sign::Plus),
        ),
        (
            "lie_group_minus",
            ManifoldSpec::quadratic_lie_group(symplectic_form(3), Sign::Minus),
        ),
        (
            "generic",
            ManifoldSpec::generic(Arc::new(SphereConstraint { n: 10 }), 10, DEFAULT_ALPHA),
        ),
    ];
    entries
        .into_iter()
        .map(|(label, spec)| SuiteEntry {
            label,
            spec: spec.expect("catalog dimensions are valid"),
        })
        .collect()
}

/// `1/2 x^T Q x + b^T x` with Gaussian symmetric `Q` and `b`.
pub(crate) fn random_quadratic(rng: &mut ChaCha8Rng, n: usize) -> Arc<dyn Objective> {
    let g = gaussian_matrix(rng, n, n);
    let q = (&g + g.transpose()) * 0.5;
    let b = gaussian_vector(rng, n);
    let (q1, q2, b1) = (q.clone(), q.clone(), b.clone());
    Arc::new(
        FnObjective::new(move |x| 0.5 * x.dot(&(&q * x)) + b.dot(x), move |x| &q1 * x + &b1)
            .with_hess_vec(move |_, d| &q2 * d),
    )
}

fn renamed(mut r: CheckReport, name: String) -> CheckReport {
    r.name = name;
    r
}

/// Runs `check` with its own RNG stream; errors become failing reports.
fn run<F>(cfg: &SuiteConfig, name: String, check: F) -> CheckReport
where
    F: FnOnce(&mut ChaCha8Rng) -> Result<CheckReport>,
{
    let mut rng = check_rng(cfg.master_seed, &name);
    match check(&mut rng) {
        Ok(r) => renamed(r, name),
        Err(e) => CheckReport::from_measures(name, 0, vec![Measure::new(format!("error: {e}"), f64::NAN, 0.0)]),
    }
}

fn derivative_checks(cfg: &SuiteConfig, label: &str, inst: &CdfInstance, grad_tol: f64, out: &mut Vec<CheckReport>) {
    out.push(run(cfg, format!("{label}/gradient_fd"), |r| {
        check_gradient_fd(inst, 4, grad_tol, r)
    }));
    out.push(run(cfg, format!("{label}/hess_fd"), |r| {
        check_hess_fd(inst, 4, 1e-4, r)
    }));
}

fn transfer(
    cfg: &SuiteConfig,
    label: &str,
    problem: Result<ProblemInstance>,
    beta: f64,
    solver: SolverKind,
    tol_grad: f64,
    check_optimum: bool,
) -> CheckReport {
    let name = format!("{label}/stationarity_transfer/{solver}");
    run(cfg, name, |_| {
        let p = problem?;
        let inst = CdfInstance::new(p.spec.clone(), p.objective.clone(), beta)?;
        let outcome = check_stationarity_transfer(&inst, solver, &p.initial_point()?, tol_grad)?;
        let mut measures = outcome.report.measures;
        if let (true, Some(opt)) = (check_optimum, p.known_optimum) {
            measures.push(Measure::new("fval_vs_oracle", (outcome.fval - opt).abs(), 1e-6));
        }
        Ok(CheckReport::from_measures(String::new(), 1, measures))
    })
}

/// Runs every check on the catalog, then derivative and end-to-end checks on
/// the benchmark problems. Each check draws from an RNG seeded by the master
/// seed and the check name, so reports do not depend on which other checks
/// ran.
pub fn run_suite(cfg: &SuiteConfig) -> Vec<CheckReport> {
    let mut out = Vec::new();
    for SuiteEntry { label, spec } in catalog(cfg.master_seed) {
        if !cfg.selected(spec.kind()) {
            continue;
        }
        let spec = if cfg.inject_fault {
            spec.with_operator_offset(FAULT_OFFSET)
        } else {
            spec
        };
        out.push(run(cfg, format!("{label}/operator_axioms"), |r| {
            check_operator_axioms(&spec, 20, 1e-8, r)
        }));
        out.push(run(cfg, format!("{label}/quadratic_decrease"), |r| {
            check_quadratic_decrease(&spec, 10, &[1e-1, 1e-2, 1e-3], r)
        }));
        let mut rng = check_rng(cfg.master_seed, &format!("{label}/objective"));
        let objective = random_quadratic(&mut rng, spec.dim());
        let inst = CdfInstance::new(spec, objective, 1.0).expect("unit beta is valid");
        derivative_checks(cfg, label, &inst, 1e-5, &mut out);
    }

    type Build = fn() -> Result<ProblemInstance>;
    let problems: [(&str, ManifoldKind, Build, f64); 4] = [
        ("hyperbola2d", ManifoldKind::Hyperbolic, hyperbola2d_problem, 1e-6),
        ("nsm", ManifoldKind::SymplecticStiefel, || nsm_problem(5, 2, 0), 1e-5),
        (
            "geneig",
            ManifoldKind::GeneralizedStiefel,
            || geneig_problem(30, 3, 0.1, 0),
            1e-5,
        ),
        ("ncm", ManifoldKind::Oblique, || ncm_problem(12, 3, 0.1, 0), 1e-5),
    ];
    for (label, kind, build, tol) in problems {
        if !cfg.selected(kind) {
            continue;
        }
        let name = format!("{label}/problem");
        match build().and_then(|p| CdfInstance::new(p.spec, p.objective, 2.0)) {
            Ok(inst) => derivative_checks(cfg, label, &inst, tol, &mut out),
            Err(e) => out.push(run(cfg, name, |_| Err(e))),
        }
    }

    if cfg.selected(ManifoldKind::Hyperbolic) {
        out.push(transfer(
            cfg,
            "hyperbola2d",
            hyperbola2d_problem(),
            1.0,
            SolverKind::Lbfgs,
            1e-8,
            false,
        ));
    }
    if cfg.selected(ManifoldKind::SymplecticStiefel) {
        out.push(transfer(
            cfg,
            "nsm",
            nsm_problem(10, 2, cfg.master_seed),
            2.0,
            SolverKind::Crm,
            1e-6,
            false,
        ));
    }
    if cfg.selected(ManifoldKind::GeneralizedStiefel) {
        let p = geneig_problem(50, 3, 0.05, cfg.master_seed);
        out.push(transfer(cfg, "geneig", p, 2.0, SolverKind::Trncg, 1e-7, true));
    }
    out
}
