//! C interface to `cdopt`.
//!
//! Objects are handed out as opaque pointers and released with the matching
//! `*_free` function. Every fallible function returns a [`CdoptStatus`]; on
//! failure a message is available from [`cdopt_last_error`] on the same
//! thread. Matrices are dense and column-major. Vectors are passed as a
//! pointer plus a length, and the length is checked against the problem
//! dimension.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;
use std::time::Duration;

use cdopt::cdf::{post_process, CdfInstance, Objective};
use cdopt::manifolds::{ManifoldSpec, Sign};
use cdopt::problems::{geneig_problem, hyperbola2d_problem, ncm_problem, nsm_problem, ProblemInstance};
use cdopt::solvers::{SolveConfig, SolveReport, SolverKind, Termination};
use cdopt::Error;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdoptStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Infeasible = 4,
    Degenerate = 5,
    Numerical = 6,
    Capability = 7,
    /// The solver stagnated or feasibility restoration failed.
    NotConverged = 8,
    Io = 9,
    /// A Rust panic was caught at the boundary.
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdoptSolver {
    Lbfgs = 0,
    Cg = 1,
    TrNewtonCg = 2,
    Crm = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdoptTermination {
    Converged = 0,
    MaxIterations = 1,
    MaxTime = 2,
    Stagnated = 3,
}

/// Stopping rules for [`cdopt_solve`]; start from [`cdopt_solve_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CdoptSolveOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub max_time_s: f64,
}

/// Summary of a solve. `fval` and `grad_norm` refer to `h` at the solver's
/// final point; `feasibility` is `|c|` at that point before any restoration.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CdoptSolveReport {
    pub fval: f64,
    pub grad_norm: f64,
    pub feasibility: f64,
    pub iterations: usize,
    pub nfev: usize,
    pub ngev: usize,
    pub nhev: usize,
    pub wall_time_s: f64,
    pub termination: c_int,
}

/// Objective supplied by C code. `value` and `gradient` are required;
/// `hess_vec` may be null. `gradient` and `hess_vec` write `n` entries to
/// `out`. Returning NaN from `value` (or writing NaN) makes the solver stop
/// with a stagnation status. The callbacks may be invoked from any thread
/// that calls into the library with the owning handle.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CdoptObjectiveCallbacks {
    pub value: Option<unsafe extern "C" fn(x: *const f64, n: usize, user: *mut c_void) -> f64>,
    pub gradient: Option<unsafe extern "C" fn(x: *const f64, n: usize, out: *mut f64, user: *mut c_void)>,
    pub hess_vec:
        Option<unsafe extern "C" fn(x: *const f64, d: *const f64, n: usize, out: *mut f64, user: *mut c_void)>,
    pub user_data: *mut c_void,
}

/// Opaque manifold handle.
pub struct CdoptManifold(ManifoldSpec);
/// Opaque benchmark problem handle.
pub struct CdoptProblem(ProblemInstance);
/// Opaque constraint dissolving function handle.
pub struct CdoptCdf(CdfInstance);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CdoptStatus {
    match e {
        Error::Argument(_) => CdoptStatus::InvalidArgument,
        Error::Shape { .. } => CdoptStatus::ShapeMismatch,
        Error::Numerical(_) => CdoptStatus::Numerical,
        Error::Degenerate { .. } => CdoptStatus::Degenerate,
        Error::Infeasible { .. } => CdoptStatus::Infeasible,
        Error::Capability(_) => CdoptStatus::Capability,
        Error::Divergence { .. } | Error::NonConvergence { .. } | Error::Stagnation { .. } => CdoptStatus::NotConverged,
        Error::Io(_) => CdoptStatus::Io,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `body`, recording any error or panic as the thread's last error.
fn guard<F: FnOnce() -> Result<(), Fail>>(body: F) -> CdoptStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CdoptStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            let s = status_of(&e);
            set_last_error(e.to_string());
            s
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(format!("null pointer passed for {what}"));
            CdoptStatus::NullPointer
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            CdoptStatus::Panic
        }
    }
}

unsafe fn href<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn read_vec(p: *const f64, n: usize, expected: usize, what: &'static str) -> Result<DVector<f64>, Fail> {
    if n != expected {
        return Err(Error::Shape { expected, got: n }.into());
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(DVector::from_column_slice(std::slice::from_raw_parts(p, n)))
}

unsafe fn write_vec(p: *mut f64, n: usize, v: &DVector<f64>, what: &'static str) -> Result<(), Fail> {
    if n != v.len() {
        return Err(Error::Shape {
            expected: v.len(),
            got: n,
        }
        .into());
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    std::slice::from_raw_parts_mut(p, n).copy_from_slice(v.as_slice());
    Ok(())
}

unsafe fn read_square(p: *const f64, m: usize, what: &'static str) -> Result<DMatrix<f64>, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(DMatrix::from_column_slice(m, m, std::slice::from_raw_parts(p, m * m)))
}

fn boxed<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cdopt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cdopt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------- manifolds

fn new_manifold(out: *mut *mut CdoptManifold, make: impl FnOnce() -> Result<ManifoldSpec, Fail>) -> CdoptStatus {
    guard(|| boxed(out, CdoptManifold(make()?)))
}

#[no_mangle]
pub extern "C" fn cdopt_manifold_sphere(n: usize, out: *mut *mut CdoptManifold) -> CdoptStatus {
    new_manifold(out, || Ok(ManifoldSpec::sphere(n)?))
}

#[no_mangle]
pub extern "C" fn cdopt_manifold_oblique(m: usize, s: usize, out: *mut *mut CdoptManifold) -> CdoptStatus {
    new_manifold(out, || Ok(ManifoldSpec::oblique(m, s)?))
}

#[no_mangle]
pub extern "C" fn cdopt_manifold_stiefel(m: usize, s: usize, out: *mut *mut CdoptManifold) -> CdoptStatus {
    new_manifold(out, || Ok(ManifoldSpec::stiefel(m, s)?))
}

#[no_mangle]
pub extern "C" fn cdopt_manifold_grassmann(m: usize, s: usize, out: *mut *mut CdoptManifold) -> CdoptStatus {
    new_manifold(out, || Ok(ManifoldSpec::grassmann(m, s)?))
}

/// `{X : X^T B X = I}` for symmetric positive definite `B` (`m x m`).
///
/// # Safety
/// `b` must point to `m * m` doubles.
#[no_mangle]
pub unsafe extern "C" fn cdopt_manifold_generalized_stiefel(
    b: *const f64,
    m: usize,
    s: usize,
    out: *mut *mut CdoptManifold,
) -> CdoptStatus {
    new_manifold(out, || {
        Ok(ManifoldSpec::generalized_stiefel(read_square(b, m, "b")?, s)?)
    })
}

/// `{X : X^T B X = I}` for symmetric indefinite `B` (`m x m`).
///
/// # Safety
/// `b` must point to `m * m` doubles.
#[no_mangle]
pub unsafe extern "C" fn cdopt_manifold_hyperbolic(
    b: *const f64,
    m: usize,
    s: usize,
    out: *mut *mut CdoptManifold,
) -> CdoptStatus {
    new_manifold(out, || Ok(ManifoldSpec::hyperbolic(read_square(b, m, "b")?, s)?))
}

/// Symplectic Stiefel manifold of `2m x 2s` matrices.
#[no_mangle]
pub extern "C" fn cdopt_manifold_symplectic_stiefel(m: usize, s: usize, out: *mut *mut CdoptManifold) -> CdoptStatus {
    new_manifold(out, || Ok(ManifoldSpec::symplectic_stiefel(m, s)?))
}

/// `{X : X^T R X = R}` with `R^T = sign * R`; `sign` is `1` or `-1`.
///
/// # Safety
/// `r` must point to `m * m` doubles.
#[no_mangle]
pub unsafe extern "C" fn cdopt_manifold_quadratic_lie_group(
    r: *const f64,
    m: usize,
    sign: c_int,
    out: *mut *mut CdoptManifold,
) -> CdoptStatus {
    new_manifold(out, || {
        let nu = match sign {
            1 => Sign::Plus,
            -1 => Sign::Minus,
            other => return Err(Error::Argument(format!("sign must be 1 or -1, got {other}")).into()),
        };
        Ok(ManifoldSpec::quadratic_lie_group(read_square(r, m, "r")?, nu)?)
    })
}

/// # Safety
/// `h` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn cdopt_manifold_free(h: *mut CdoptManifold) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Length of a point, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_manifold_dim(h: *const CdoptManifold) -> usize {
    h.as_ref().map_or(0, |m| m.0.dim())
}

/// Number of constraints, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_manifold_constraint_dim(h: *const CdoptManifold) -> usize {
    h.as_ref().map_or(0, |m| m.0.constraint_dim())
}

/// Writes `A(x)` to `out`.
///
/// # Safety
/// `x` and `out` must point to `n` doubles; `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_manifold_operator(
    h: *const CdoptManifold,
    x: *const f64,
    out: *mut f64,
    n: usize,
) -> CdoptStatus {
    guard(|| {
        let spec = &href(h, "manifold")?.0;
        let x = read_vec(x, n, spec.dim(), "x")?;
        write_vec(out, n, &spec.operator_apply(&x)?, "out")
    })
}

/// Writes `|c(x)|` to `out`.
///
/// # Safety
/// `x` must point to `n` doubles; `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_manifold_feasibility(
    h: *const CdoptManifold,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> CdoptStatus {
    guard(|| {
        let spec = &href(h, "manifold")?.0;
        let x = read_vec(x, n, spec.dim(), "x")?;
        *out_ref(out, "out")? = spec.feasibility(&x)?;
        Ok(())
    })
}

/// Writes a random feasible point drawn from `seed`.
///
/// # Safety
/// `out` must point to `n` doubles; `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_manifold_sample(
    h: *const CdoptManifold,
    seed: u64,
    out: *mut f64,
    n: usize,
) -> CdoptStatus {
    guard(|| {
        let spec = &href(h, "manifold")?.0;
        let x = spec.sample_feasible(&mut ChaCha8Rng::seed_from_u64(seed))?;
        write_vec(out, n, &x, "out")
    })
}

/// Applies the operator until `|c| <= eps`, at most `k_max` times, and
/// writes the point to `out` and the number of applications to `iterations`
/// (which may be null).
///
/// # Safety
/// `x` and `out` must point to `n` doubles; `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_post_process(
    h: *const CdoptManifold,
    x: *const f64,
    n: usize,
    eps: f64,
    k_max: usize,
    out: *mut f64,
    iterations: *mut usize,
) -> CdoptStatus {
    guard(|| {
        let spec = &href(h, "manifold")?.0;
        let x = read_vec(x, n, spec.dim(), "x")?;
        let (y, k) = post_process(spec, &x, eps, k_max)?;
        write_vec(out, n, &y, "out")?;
        if let Some(it) = iterations.as_mut() {
            *it = k;
        }
        Ok(())
    })
}

// ----------------------------------------------------------------- problems

fn new_problem(out: *mut *mut CdoptProblem, make: impl FnOnce() -> cdopt::Result<ProblemInstance>) -> CdoptStatus {
    guard(|| boxed(out, CdoptProblem(make()?)))
}

/// Nearest symplectic matrix problem on `2m x 2s` matrices.
#[no_mangle]
pub extern "C" fn cdopt_problem_nsm(m: usize, s: usize, seed: u64, out: *mut *mut CdoptProblem) -> CdoptStatus {
    new_problem(out, || nsm_problem(m, s, seed))
}

#[no_mangle]
pub extern "C" fn cdopt_problem_geneig(
    m: usize,
    s: usize,
    density: f64,
    seed: u64,
    out: *mut *mut CdoptProblem,
) -> CdoptStatus {
    new_problem(out, || geneig_problem(m, s, density, seed))
}

#[no_mangle]
pub extern "C" fn cdopt_problem_ncm(
    m: usize,
    s: usize,
    theta: f64,
    seed: u64,
    out: *mut *mut CdoptProblem,
) -> CdoptStatus {
    new_problem(out, || ncm_problem(m, s, theta, seed))
}

#[no_mangle]
pub extern "C" fn cdopt_problem_hyperbola2d(out: *mut *mut CdoptProblem) -> CdoptStatus {
    new_problem(out, hyperbola2d_problem)
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_problem_free(h: *mut CdoptProblem) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_problem_dim(h: *const CdoptProblem) -> usize {
    h.as_ref().map_or(0, |p| p.0.spec.dim())
}

/// Copies the problem's manifold into a new handle.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_problem_manifold(h: *const CdoptProblem, out: *mut *mut CdoptManifold) -> CdoptStatus {
    guard(|| boxed(out, CdoptManifold(href(h, "problem")?.0.spec.clone())))
}

/// Writes the seeded starting point.
///
/// # Safety
/// `out` must point to `n` doubles; `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_problem_initial_point(h: *const CdoptProblem, out: *mut f64, n: usize) -> CdoptStatus {
    guard(|| write_vec(out, n, &href(h, "problem")?.0.initial_point()?, "out"))
}

/// Writes `f(x)`.
///
/// # Safety
/// `x` must point to `n` doubles; `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_problem_value(
    h: *const CdoptProblem,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> CdoptStatus {
    guard(|| {
        let p = &href(h, "problem")?.0;
        let x = read_vec(x, n, p.spec.dim(), "x")?;
        *out_ref(out, "out")? = p.objective.value(&x);
        Ok(())
    })
}

/// Writes the known optimal value to `out` and returns `Ok`, or returns
/// `Capability` when the problem has none.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_problem_known_optimum(h: *const CdoptProblem, out: *mut f64) -> CdoptStatus {
    guard(|| {
        let p = &href(h, "problem")?.0;
        let v = p
            .known_optimum
            .ok_or_else(|| Error::Capability(format!("{} has no known optimum", p.name)))?;
        *out_ref(out, "out")? = v;
        Ok(())
    })
}

// --------------------------------------------------------------------- cdf

struct CallbackObjective {
    cb: CdoptObjectiveCallbacks,
}

// The caller promises that the callbacks and `user_data` may be used from
// whichever thread drives the handle.
unsafe impl Send for CallbackObjective {}
unsafe impl Sync for CallbackObjective {}

impl Objective for CallbackObjective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let f = self.cb.value.expect("checked at construction");
        unsafe { f(x.as_ptr(), x.len(), self.cb.user_data) }
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let g = self.cb.gradient.expect("checked at construction");
        let mut out = DVector::from_element(x.len(), f64::NAN);
        unsafe { g(x.as_ptr(), x.len(), out.as_mut_ptr(), self.cb.user_data) };
        out
    }

    fn hess_vec(&self, x: &DVector<f64>, d: &DVector<f64>) -> Option<DVector<f64>> {
        let h = self.cb.hess_vec?;
        let mut out = DVector::from_element(x.len(), f64::NAN);
        unsafe { h(x.as_ptr(), d.as_ptr(), x.len(), out.as_mut_ptr(), self.cb.user_data) };
        Some(out)
    }

    fn has_hess_vec(&self) -> bool {
        self.cb.hess_vec.is_some()
    }
}

/// `h` for a benchmark problem with penalty `beta`.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_cdf_from_problem(
    problem: *const CdoptProblem,
    beta: f64,
    out: *mut *mut CdoptCdf,
) -> CdoptStatus {
    guard(|| {
        let p = &href(problem, "problem")?.0;
        boxed(
            out,
            CdoptCdf(CdfInstance::new(p.spec.clone(), p.objective.clone(), beta)?),
        )
    })
}

/// `h` for a user objective over `manifold` with penalty `beta`. The
/// manifold is copied, so its handle may be freed afterwards.
///
/// # Safety
/// `manifold` must be a live handle and `callbacks` must stay valid for the
/// lifetime of the returned handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_cdf_from_callbacks(
    manifold: *const CdoptManifold,
    callbacks: CdoptObjectiveCallbacks,
    beta: f64,
    out: *mut *mut CdoptCdf,
) -> CdoptStatus {
    guard(|| {
        let spec = href(manifold, "manifold")?.0.clone();
        if callbacks.value.is_none() || callbacks.gradient.is_none() {
            return Err(Fail::Null("objective value or gradient callback"));
        }
        let obj: Arc<dyn Objective> = Arc::new(CallbackObjective { cb: callbacks });
        boxed(out, CdoptCdf(CdfInstance::new(spec, obj, beta)?))
    })
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_cdf_free(h: *mut CdoptCdf) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_cdf_dim(h: *const CdoptCdf) -> usize {
    h.as_ref().map_or(0, |c| c.0.spec().dim())
}

/// Writes `h(x)`.
///
/// # Safety
/// `x` must point to `n` doubles; `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_cdf_value(h: *const CdoptCdf, x: *const f64, n: usize, out: *mut f64) -> CdoptStatus {
    guard(|| {
        let inst = &href(h, "cdf")?.0;
        let x = read_vec(x, n, inst.spec().dim(), "x")?;
        *out_ref(out, "out")? = inst.value(&x)?;
        Ok(())
    })
}

/// Writes `grad h(x)`.
///
/// # Safety
/// `x` and `out` must point to `n` doubles; `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_cdf_gradient(h: *const CdoptCdf, x: *const f64, out: *mut f64, n: usize) -> CdoptStatus {
    guard(|| {
        let inst = &href(h, "cdf")?.0;
        let x = read_vec(x, n, inst.spec().dim(), "x")?;
        write_vec(out, n, &inst.gradient(&x)?, "out")
    })
}

/// Writes the Hessian of `h` at `x` applied to `d`.
///
/// # Safety
/// `x`, `d` and `out` must point to `n` doubles; `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_cdf_hess_vec(
    h: *const CdoptCdf,
    x: *const f64,
    d: *const f64,
    out: *mut f64,
    n: usize,
) -> CdoptStatus {
    guard(|| {
        let inst = &href(h, "cdf")?.0;
        let dim = inst.spec().dim();
        let x = read_vec(x, n, dim, "x")?;
        let d = read_vec(d, n, dim, "d")?;
        write_vec(out, n, &inst.hess_vec(&x, &d)?, "out")
    })
}

// ------------------------------------------------------------------- solve

#[no_mangle]
pub extern "C" fn cdopt_solve_options_default() -> CdoptSolveOptions {
    let d = SolveConfig::default();
    CdoptSolveOptions {
        grad_tol: d.grad_tol,
        max_iter: d.max_iter,
        max_time_s: d.max_time.as_secs_f64(),
    }
}

fn fill_report(inst: &CdfInstance, r: &SolveReport) -> CdoptSolveReport {
    CdoptSolveReport {
        fval: r.fval,
        grad_norm: r.grad_norm,
        feasibility: inst.feasibility(&r.x_final).unwrap_or(f64::NAN),
        iterations: r.iterations,
        nfev: r.nfev,
        ngev: r.ngev,
        nhev: r.nhev,
        wall_time_s: r.wall_time.as_secs_f64(),
        termination: match r.termination {
            Termination::Converged => CdoptTermination::Converged,
            Termination::MaxIterations => CdoptTermination::MaxIterations,
            Termination::MaxTime => CdoptTermination::MaxTime,
            Termination::Stagnated => CdoptTermination::Stagnated,
        } as c_int,
    }
}

/// Minimizes `h` from `x0` with the method given by a [`CdoptSolver`] value
/// and writes the final point to `x_out`. A null
/// `options` uses the defaults; `report` may be null. When the solver
/// stagnates, the last point and the report are still written and
/// `NotConverged` is returned. Hitting the iteration or time limit returns
/// `Ok` with the termination recorded in the report.
///
/// # Safety
/// `x0` and `x_out` must point to `n` doubles; `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cdopt_solve(
    h: *const CdoptCdf,
    solver: c_int,
    x0: *const f64,
    n: usize,
    options: *const CdoptSolveOptions,
    x_out: *mut f64,
    report: *mut CdoptSolveReport,
) -> CdoptStatus {
    guard(|| {
        let inst = &href(h, "cdf")?.0;
        let x0 = read_vec(x0, n, inst.spec().dim(), "x0")?;
        let opts = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| cdopt_solve_options_default());
        if !(opts.max_time_s > 0.0 && opts.max_time_s.is_finite()) {
            return Err(Error::Argument("max_time_s must be positive and finite".into()).into());
        }
        let cfg = SolveConfig {
            grad_tol: opts.grad_tol,
            max_iter: opts.max_iter,
            max_time: Duration::from_secs_f64(opts.max_time_s),
            ..SolveConfig::default()
        };
        let kind = match solver {
            s if s == CdoptSolver::Lbfgs as c_int => SolverKind::Lbfgs,
            s if s == CdoptSolver::Cg as c_int => SolverKind::Cg,
            s if s == CdoptSolver::TrNewtonCg as c_int => SolverKind::Trncg,
            s if s == CdoptSolver::Crm as c_int => SolverKind::Crm,
            other => return Err(Error::Argument(format!("unknown solver code {other}")).into()),
        };
        let (r, err) = match kind.minimize(inst, &x0, &cfg) {
            Ok(r) => (r, None),
            Err(Error::Stagnation { reason, report }) => {
                let r = (*report).clone();
                (r, Some(Error::Stagnation { reason, report }))
            }
            Err(e) => return Err(e.into()),
        };
        write_vec(x_out, n, &r.x_final, "x_out")?;
        if let Some(out) = report.as_mut() {
            *out = fill_report(inst, &r);
        }
        match err {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    })
}
