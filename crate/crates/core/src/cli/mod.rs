//! Command-line front end: `bench`, `verify` and `contour`.
//!
//! Exit statuses: 0 on success, 1 when a verification check fails, 2 when a
//! solve does not converge or feasibility cannot be restored, 64 on usage
//! errors, 74 on I/O failures and 70 on any other internal error.

mod bench;
mod contour;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cdf::PenaltyConfig;
use crate::error::Error;
use crate::manifolds::ManifoldKind;
use crate::problems::{ProblemKind, ProblemParams};
use crate::solvers::SolverKind;
use crate::verify::{run_suite, write_json_lines, SuiteConfig};

pub use bench::{run_bench, write_row, BenchOutcome, BenchRow, BetaMode, OutputFormat, RunConfig, BETA_FLOOR};
pub use contour::{contour_grid, write_contour, ContourPoint, Grid, SINGULAR_TOL};

/// Penalty parameter when neither `--beta` nor `--beta-auto` is given.
pub const DEFAULT_BETA: f64 = 2.0;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_SOFTWARE: i32 = 70;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Parser)]
#[command(
    name = "cdopt",
    version,
    about = "Optimization over matrix manifolds via constraint dissolving functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a benchmark problem and report the result row.
    Bench(BenchArgs),
    /// Run the numerical verification suite; prints one JSON object per check.
    Verify(VerifyArgs),
    /// Emit h and Fletcher's penalty on a grid for the hyperbola example.
    Contour(ContourArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProblemArg {
    Nsm,
    Geneig,
    Ncm,
    Hyperbola2d,
}

impl From<ProblemArg> for ProblemKind {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::Nsm => ProblemKind::Nsm,
            ProblemArg::Geneig => ProblemKind::Geneig,
            ProblemArg::Ncm => ProblemKind::Ncm,
            ProblemArg::Hyperbola2d => ProblemKind::Hyperbola2d,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Lbfgs,
    Cg,
    Trncg,
    Crm,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Lbfgs => SolverKind::Lbfgs,
            SolverArg::Cg => SolverKind::Cg,
            SolverArg::Trncg => SolverKind::Trncg,
            SolverArg::Crm => SolverKind::Crm,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct BenchArgs {
    problem: ProblemArg,
    /// Rows of the variable (half the rows for nsm).
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Columns of the variable (half the columns for nsm).
    #[arg(long, default_value_t = 2)]
    s: usize,
    /// Density of the random sparse matrices (geneig).
    #[arg(long, default_value_t = 0.01)]
    density: f64,
    /// Weight of the random perturbation of the target (ncm).
    #[arg(long, default_value_t = 0.1)]
    theta: f64,
    /// Dense target matrix file for ncm: the order on the first line, then the rows.
    #[arg(long)]
    ncm_matrix: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "lbfgs")]
    solver: SolverArg,
    /// Fixed penalty parameter [default: 2].
    #[arg(long, conflicts_with = "beta_auto")]
    beta: Option<f64>,
    /// Estimate beta by sampling around the starting point.
    #[arg(long)]
    beta_auto: bool,
    #[arg(long, default_value_t = 1e-5)]
    tol_grad: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol_feas: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 1200.0)]
    max_time: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated manifold kinds to check (default: all).
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<String>>,
    /// Shift every operator so that the operator checks must fail.
    #[arg(long)]
    inject_fault: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ContourArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    xmin: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    xmax: f64,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    ymin: f64,
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    ymax: f64,
    #[arg(long, default_value_t = 101)]
    nx: usize,
    #[arg(long, default_value_t = 101)]
    ny: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Argument(_) | Error::Shape { .. } => EXIT_USAGE,
        Error::Io(_) => EXIT_IO,
        Error::Stagnation { .. } | Error::Divergence { .. } | Error::NonConvergence { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_SOFTWARE,
    }
}

fn open_out(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn bench_config(a: &BenchArgs) -> crate::Result<RunConfig> {
    if !(a.max_time > 0.0 && a.max_time.is_finite()) {
        return Err(Error::Argument("max-time must be positive".into()));
    }
    let beta = match (a.beta, a.beta_auto) {
        (Some(b), false) => BetaMode::Fixed(b),
        (None, true) => BetaMode::Auto(PenaltyConfig::default()),
        (None, false) => BetaMode::Fixed(DEFAULT_BETA),
        (Some(_), true) => unreachable!("clap rejects conflicting beta flags"),
    };
    Ok(RunConfig {
        problem: a.problem.into(),
        params: ProblemParams {
            m: a.m,
            s: a.s,
            density: a.density,
            theta: a.theta,
            seed: a.seed,
            ncm_matrix: a.ncm_matrix.clone(),
        },
        solver: a.solver.into(),
        beta,
        tol_grad: a.tol_grad,
        tol_feas: a.tol_feas,
        max_iter: a.max_iter,
        max_time: Duration::from_secs_f64(a.max_time),
        format: match a.format {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
        },
        out: a.out.clone(),
    })
}

fn bench(a: &BenchArgs) -> crate::Result<i32> {
    let cfg = bench_config(a)?;
    let outcome = run_bench(&cfg)?;
    write_row(open_out(&cfg.out)?, &outcome.row, cfg.format)?;
    if outcome.success() {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "cdopt: solver stopped with {:?}; feasibility restored: {}",
            outcome.termination, outcome.restored
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn verify(a: &VerifyArgs) -> crate::Result<i32> {
    let kinds = match &a.kinds {
        None => None,
        Some(names) => Some(
            names
                .iter()
                .map(|n| {
                    ManifoldKind::from_name(n.trim()).ok_or_else(|| {
                        let known: Vec<&str> = ManifoldKind::ALL.iter().map(|k| k.name()).collect();
                        Error::Argument(format!(
                            "unknown manifold kind {n:?}; expected one of {}",
                            known.join(", ")
                        ))
                    })
                })
                .collect::<crate::Result<Vec<_>>>()?,
        ),
    };
    let cfg = SuiteConfig {
        master_seed: a.seed,
        kinds,
        inject_fault: a.inject_fault || cfg!(feature = "fault-injection"),
    };
    let reports = run_suite(&cfg);
    let mut out = open_out(&a.out)?;
    write_json_lines(&mut out, &reports)?;
    out.flush()?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("cdopt: failed checks: {}", failed.join(", "));
        Ok(EXIT_VERIFY_FAILED)
    }
}

fn contour(a: &ContourArgs) -> crate::Result<i32> {
    let grid = Grid {
        xmin: a.xmin,
        xmax: a.xmax,
        ymin: a.ymin,
        ymax: a.ymax,
        nx: a.nx,
        ny: a.ny,
    };
    let points = contour_grid(&grid, a.beta)?;
    let mut out = open_out(&a.out)?;
    write_contour(&mut out, &points)?;
    out.flush()?;
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify(a),
        Command::Contour(a) => contour(a),
    };
    match result {
        Ok(code) => code,
        // The reader went away (for example `cdopt contour | head`).
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("cdopt: {e}");
            exit_code(&e)
        }
    }
}
