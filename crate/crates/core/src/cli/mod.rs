//! Command-line front end: training runs with result files, comparison
//! tables over result directories, and the numerical self-checks.

mod run;
mod table;
mod validate;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::fractional::FractionalError;
use crate::network::NetworkError;
use crate::problem::ProblemError;
use crate::trainer::{NetKind, TrainError};

pub use run::{build_problem, run, ProblemSource, RunConfig, RunSummary};
pub use table::{table, TableFormat, TableOutput};
pub use validate::{validate, SuiteReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Fractional(#[from] FractionalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "ocp-kan", version, about = "Physics-informed KAN solver for optimal control problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train KAN and MLP models on one problem and write result files.
    Run(RunArgs),
    /// Tabulate cost and errors from result directories.
    Table(TableArgs),
    /// Run the quadrature, Caputo, autodiff and B-spline self-checks.
    Validate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Kan,
    Mlp,
}

impl From<ModelArg> for NetKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Kan => NetKind::Kan,
            ModelArg::Mlp => NetKind::Mlp,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Builtin problem: frac_forward, frac_inverse, ide, pde2d or heat2d.
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    pub problem: Option<String>,
    /// Problem definition file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gauss nodes per dimension for the cost and collocation grid.
    #[arg(long)]
    pub quad_order: Option<usize>,
    /// Points of the Caputo grid.
    #[arg(long)]
    pub frac_grid: Option<usize>,
    #[arg(long = "weight-J")]
    pub weight_cost: Option<f64>,
    #[arg(long = "weight-R")]
    pub weight_residual: Option<f64>,
    #[arg(long = "weight-B")]
    pub weight_boundary: Option<f64>,
    #[arg(long = "weight-O")]
    pub weight_observation: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Evaluation grid points per coordinate, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eval_points: Option<Vec<usize>>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "kan,mlp")]
    pub models: Vec<ModelArg>,
    /// Output directory; defaults to results/<problem name>.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record wall_time_s as 0, making repeated runs byte-identical.
    #[arg(long)]
    pub deterministic: bool,
    /// Also write the Caputo operational matrix.
    #[arg(long)]
    pub save_caputo: bool,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Result directories written by `run`.
    pub dirs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: TableFormat,
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Run(args) => {
            let cfg = RunConfig::from_args(&args)?;
            for s in run(&cfg)? {
                println!("{}", s.line());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Table(args) => {
            let out = table(&args.dirs, args.format)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", out.text);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate => {
            let reports = validate();
            let mut ok = true;
            for r in &reports {
                println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.name);
                for d in &r.details {
                    println!("    {d}");
                }
                ok &= r.passed;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
