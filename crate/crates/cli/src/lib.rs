//! Command-line front end of `semdde`.
//!
//! Every command reads a JSON [`RunConfig`](config::RunConfig), writes its
//! data files (JSON and CSV, each carrying a `format_version`) into an output
//! directory and puts timing information in a separate `meta.json`, so that
//! data files are byte-identical between runs.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;

pub mod commands;
pub mod config;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "semdde", version, about = "Periodic orbits of delay equations by spectral-element collocation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Converge one periodic orbit.
    Solve(CommonArgs),
    /// Continue a branch of periodic orbits in the parameter.
    Continue(CommonArgs),
    /// Residual of converged orbits over a grid of (L, m).
    Convergence(CommonArgs),
    /// Periodic points of the circle map of a state-dependent delay.
    CircleMap(CommonArgs),
    /// Node and Lebesgue-constant tables.
    Nodes(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` of the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Grid points for the residual `err` (overrides `grid`).
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Solver(semdde::Error),
}

impl CliError {
    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Solver(_) => "solver",
        }
    }
}

impl From<semdde::Error> for CliError {
    fn from(e: semdde::Error) -> Self {
        use semdde::Error as E;
        match e {
            E::MaxIterExceeded { .. }
            | E::SingularJacobian { .. }
            | E::NonFiniteResidual
            | E::StepFailure { .. }
            | E::CollapsedToEquilibrium { .. }
            | E::NegativeDelay { .. }
            | E::OutOfWindow { .. } => CliError::Solver(e),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    format_version: u32,
    error: &'a str,
    message: String,
    exit_code: i32,
}

/// Machine-readable form of an error, as printed on stderr.
pub fn error_json(e: &CliError) -> String {
    serde_json::to_string(&ErrorReport {
        format_version: semdde::FORMAT_VERSION,
        error: e.kind(),
        message: e.to_string(),
        exit_code: e.exit_code(),
    })
    .expect("error report serializes")
}

fn prepare(args: &CommonArgs, needs_config: bool) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None if needs_config => return Err(CliError::Config("--config is required".into())),
        None => RunConfig::default(),
    };
    if let Some(grid) = args.grid {
        cfg.grid = grid;
        cfg.validate()?;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    Ok((cfg, out))
}

fn run_command(cli: &Cli) -> Result<(), CliError> {
    let (args, needs_config) = match &cli.command {
        Command::Nodes(a) => (a, false),
        Command::Solve(a) | Command::Continue(a) | Command::Convergence(a) | Command::CircleMap(a) => (a, true),
    };
    if args.jobs == 0 {
        return Err(CliError::Config("--jobs must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(CliError::config)?;
    let (cfg, out) = prepare(args, needs_config)?;
    pool.install(|| match &cli.command {
        Command::Solve(_) => commands::solve(&cfg, &out),
        Command::Continue(_) => commands::continue_branch(&cfg, &out),
        Command::Convergence(_) => commands::convergence(&cfg, &out),
        Command::CircleMap(_) => commands::circle_map(&cfg, &out),
        Command::Nodes(_) => commands::nodes(&cfg, &out),
    })
}

/// Runs a parsed command line and returns the process exit code. Errors are
/// reported as one JSON object on stderr.
pub fn run(cli: &Cli) -> i32 {
    match run_command(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}
