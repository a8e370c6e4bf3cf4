//! Command-line front end of the `distreconf` binary.

mod jobs;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use distreconf::formulation::{ModelKind, DEFAULT_VOLL};
use distreconf::qubo::QuboMethod;
use distreconf::socp::{Algorithm, SolverSettings};

/// Fault restoration of radial distribution feeders.
#[derive(Debug, Parser)]
#[command(name = "distreconf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve each scenario and write result documents and profiles.
    Solve(SolveArgs),
    /// Run several solvers per scenario and tabulate the differences.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "exact")]
    solver: SolverArg,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated, at least two of exact-bf, exact-bi, admm.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "exact-bf,exact-bi,admm"
    )]
    solvers: Vec<CompareSolver>,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Feeder document (JSON).
    #[arg(long)]
    network: PathBuf,
    /// Fault scenario documents; the intact feeder when omitted.
    #[arg(long, num_args = 1..)]
    scenario: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "bf")]
    model: ModelArg,
    /// QUBO backend of the ADMM solver.
    #[arg(long, value_enum, default_value = "exhaustive")]
    qubo: QuboArg,
    /// Value of lost load.
    #[arg(long, default_value_t = DEFAULT_VOLL)]
    voll: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// ADMM penalty.
    #[arg(long, default_value_t = 10.0)]
    rho: f64,
    /// ADMM iteration cap.
    #[arg(long, default_value_t = 100)]
    admm_iters: usize,
    /// ADMM rounding threshold.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Report wall times (stderr, and a runtime column in compare.csv).
    #[arg(long)]
    timing: bool,
    #[arg(long, env = "DISTRECONF_EPS_PRIMAL", default_value_t = 1e-7)]
    eps_primal: f64,
    #[arg(long, env = "DISTRECONF_EPS_DUAL", default_value_t = 1e-7)]
    eps_dual: f64,
    #[arg(long, env = "DISTRECONF_MAX_ITERS", default_value_t = 100_000)]
    max_iters: usize,
    /// Algorithm of the continuous conic solves.
    #[arg(long, env = "DISTRECONF_ALGORITHM", value_enum, default_value = "ipm")]
    algorithm: AlgorithmArg,
}

impl Common {
    fn settings(&self) -> SolverSettings<f64> {
        SolverSettings {
            algorithm: match self.algorithm {
                AlgorithmArg::Ipm => Algorithm::InteriorPoint,
                AlgorithmArg::Splitting => Algorithm::Admm,
            },
            eps_primal: self.eps_primal,
            eps_dual: self.eps_dual,
            max_iters: self.max_iters,
            ..SolverSettings::default()
        }
    }

    fn qubo(&self) -> QuboMethod {
        match self.qubo {
            QuboArg::Exhaustive => QuboMethod::Exhaustive,
            QuboArg::Sa => QuboMethod::Annealing,
            QuboArg::Qaoa => QuboMethod::Qaoa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Bf,
    Bi,
    Both,
}

impl ModelArg {
    fn kinds(self) -> Vec<ModelKind> {
        match self {
            ModelArg::Bf => vec![ModelKind::BranchFlow],
            ModelArg::Bi => vec![ModelKind::BusInjection],
            ModelArg::Both => vec![ModelKind::BranchFlow, ModelKind::BusInjection],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QuboArg {
    Exhaustive,
    Sa,
    Qaoa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    /// Interior-point method.
    Ipm,
    /// Operator splitting (first-order).
    Splitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Exact,
    Admm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum CompareSolver {
    ExactBf,
    ExactBi,
    Admm,
}

/// Failure of the run itself (exit 1).
#[derive(Debug)]
pub struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 optimal, 1 usage or I/O error, 2 infeasible, 3 iteration limit.
/// Reports go to `stdout`; errors and timings to the process stderr.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return 1;
        }
        Err(e) => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => jobs::solve(&args.common, args.solver, stdout),
        Command::Compare(args) => jobs::compare(&args.common, &args.solvers, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}
