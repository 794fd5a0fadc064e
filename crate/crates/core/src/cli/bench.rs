use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::cdf::{estimate_beta, post_process_traced, CdfInstance, PenaltyConfig};
use crate::error::{Error, Result};
use crate::problems::{build_problem, stream, ProblemKind, ProblemParams};
use crate::solvers::{SolveConfig, SolveReport, SolverKind, Termination};

/// Smallest penalty parameter used when the estimator returns zero.
pub const BETA_FLOOR: f64 = 1e-8;
/// Cap on operator applications during post-processing.
pub const POST_PROCESS_MAX: usize = 50;
const BETA_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum BetaMode {
    Fixed(f64),
    Auto(PenaltyConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Everything needed to run one benchmark.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub params: ProblemParams,
    pub solver: SolverKind,
    pub beta: BetaMode,
    pub tol_grad: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    pub max_time: Duration,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(problem: ProblemKind, solver: SolverKind) -> Self {
        RunConfig {
            problem,
            params: ProblemParams::default(),
            solver,
            beta: BetaMode::Fixed(2.0),
            tol_grad: 1e-5,
            tol_feas: 1e-12,
            max_iter: 1000,
            max_time: Duration::from_secs(1200),
            format: OutputFormat::Json,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_grad > 0.0 && self.tol_feas > 0.0) {
            return Err(Error::Argument("tolerances must be positive".into()));
        }
        match &self.beta {
            BetaMode::Fixed(b) if !(*b > 0.0 && b.is_finite()) => {
                Err(Error::Argument(format!("beta must be positive and finite, got {b}")))
            }
            BetaMode::Auto(p) => p.validate(),
            BetaMode::Fixed(_) => Ok(()),
        }
    }
}

/// One result row. Field order is the output column order.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub problem: String,
    pub solver: String,
    pub beta: f64,
    /// `f` at the post-processed point.
    pub fval: f64,
    pub iter: usize,
    pub nfev: usize,
    pub ngev: usize,
    /// `|grad h|` when the solver stopped.
    pub gradnorm: f64,
    /// `|c|` after post-processing.
    pub feas: f64,
    pub wall_time_s: f64,
    pub seed: u64,
}

/// Row plus the facts that decide the exit status.
#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub row: BenchRow,
    pub termination: Termination,
    /// Whether post-processing reached the feasibility tolerance.
    pub restored: bool,
    pub report: SolveReport,
}

impl BenchOutcome {
    pub fn success(&self) -> bool {
        self.termination == Termination::Converged && self.restored
    }
}

/// Builds the problem and `h`, minimizes from the seeded start, restores
/// feasibility and collects the result row. Stagnation and restoration
/// failures still yield a row describing the last point reached.
pub fn run_bench(cfg: &RunConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    let problem = build_problem(cfg.problem, &cfg.params)?;
    let x0 = problem.initial_point()?;
    let beta = match &cfg.beta {
        BetaMode::Fixed(b) => *b,
        BetaMode::Auto(p) => {
            let mut rng = stream(cfg.params.seed, BETA_STREAM);
            estimate_beta(&problem.spec, problem.objective.as_ref(), &x0, p, &mut rng)?.max(BETA_FLOOR)
        }
    };
    let inst = CdfInstance::new(problem.spec.clone(), problem.objective.clone(), beta)?;
    let solve_cfg = SolveConfig {
        grad_tol: cfg.tol_grad,
        max_iter: cfg.max_iter,
        max_time: cfg.max_time,
        ..SolveConfig::default()
    };
    let start = Instant::now();
    let report = match cfg.solver.minimize(&inst, &x0, &solve_cfg) {
        Ok(r) => r,
        Err(Error::Stagnation { report, .. }) => *report,
        Err(e) => return Err(e),
    };
    let (x, feas, restored) = match post_process_traced(&problem.spec, &report.x_final, cfg.tol_feas, POST_PROCESS_MAX)
    {
        Ok(r) => {
            let feas = *r.trace.last().expect("trace is never empty");
            (r.x, feas, true)
        }
        Err(Error::Divergence { trace } | Error::NonConvergence { trace }) => {
            let feas = trace.last().copied().unwrap_or(f64::NAN);
            (report.x_final.clone(), feas, false)
        }
        Err(e) => return Err(e),
    };
    let wall = start.elapsed().as_secs_f64();
    let row = BenchRow {
        problem: problem.name.clone(),
        solver: cfg.solver.name().to_string(),
        beta,
        fval: problem.objective.value(&x),
        iter: report.iterations,
        nfev: report.nfev,
        ngev: report.ngev,
        gradnorm: report.grad_norm,
        feas,
        wall_time_s: wall,
        seed: cfg.params.seed,
    };
    Ok(BenchOutcome {
        row,
        termination: report.termination,
        restored,
        report,
    })
}

/// Writes the row as a single JSON object or as a CSV header plus one line.
pub fn write_row<W: Write>(out: W, row: &BenchRow, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer(&mut out, row).map_err(|e| Error::Io(e.into()))?;
            writeln!(out)?;
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.serialize(row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
            w.flush()?;
        }
    }
    Ok(())
}
