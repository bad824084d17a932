//! `fs3r` command-line driver.
//!
//! Exit codes: 0 success, 1 numeric failure, 2 usage error, 3 I/O error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fs3r::Method;

#[derive(Debug, Parser)]
#[command(name = "fs3r", version, about = "Closed-form rigid registration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the nine standard synthetic cases with each solver.
    Cases(CasesArgs),
    /// Register one correspondence set: two PLY files matched by index, or a generated case.
    Solve(SolveArgs),
    /// Iterative closest point between two PLY clouds.
    Icp(IcpArgs),
    /// Time profile accumulation plus solve over a sweep of sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Common {
    /// Comma-separated solvers: fs3r, eig, svd.
    #[arg(long, value_delimiter = ',', default_value = "fs3r")]
    solver: Vec<Method>,
    /// Base seed; case k uses seed + k.
    #[arg(long, env = "FS3R_SEED", default_value_t = 0)]
    seed: u64,
    /// Timed runs per solve.
    #[arg(long)]
    repeat: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Relative tolerance for the degenerate eigenvalue branch.
    #[arg(long, default_value_t = 1e-8, allow_negative_numbers = true)]
    xi: f64,
}

#[derive(Debug, Args)]
struct CasesArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Reference points (PLY).
    #[arg(requires = "target", conflicts_with = "case")]
    source: Option<PathBuf>,
    /// Body points (PLY), matched to the source by index.
    target: Option<PathBuf>,
    /// Solve a generated case (1 to 9) instead of reading files.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=9))]
    case: Option<u32>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct IcpArgs {
    /// Cloud to move (PLY).
    source: PathBuf,
    /// Fixed cloud (PLY).
    target: PathBuf,
    #[arg(long, default_value_t = 30)]
    max_iterations: usize,
    /// Stop when the mean squared error changes by less than this.
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated correspondence counts.
    #[arg(long, value_delimiter = ',', default_values_t = fs3r::bench::DEFAULT_SIZES)]
    sizes: Vec<usize>,
    #[command(flatten)]
    common: Common,
}

/// A failed command, tagged with its exit code.
#[derive(Debug)]
enum Failure {
    Numeric(String),
    Usage(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Numeric(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Numeric(m) | Failure::Usage(m) | Failure::Io(m) => m,
        }
    }
}

impl From<fs3r::Error> for Failure {
    fn from(e: fs3r::Error) -> Self {
        let root = match &e {
            fs3r::Error::Icp { source, .. } => source.as_ref(),
            other => other,
        };
        if root.is_io() {
            Failure::Io(e.to_string())
        } else if matches!(root, fs3r::Error::InvalidArgument(_)) {
            Failure::Usage(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Cases(a) => commands::cases(&a.common),
        Command::Solve(a) => commands::solve(&a),
        Command::Icp(a) => commands::icp(&a),
        Command::Bench(a) => commands::bench(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fs3r: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
