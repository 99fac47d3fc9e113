//! Command-line runner for random-subspace Frank-Wolfe experiments.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a configuration error.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, FormatFlags};
use crate::error::CliError;
use crate::output::OutputDir;

pub const DEFAULT_OUT: &str = "rsfw-out";

#[derive(Debug, Parser)]
#[command(name = "rsfw", version, about = "Random-subspace Frank-Wolfe experiment runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo section ratios against the expectation sandwich.
    Ratios(RunArgs),
    /// Replicated RSFW and full FW runs on a generated or saved instance.
    Solve(RunArgs),
    /// Spectral sandwich coverage and compressed-curvature descent.
    Curvature(RunArgs),
    /// RSFW stagnation on a simplex-like polytope.
    Failure(RunArgs),
    /// Finite-sum stochastic RSFW with growing batches.
    Stoch(RunArgs),
    /// Graph-regularized semi-supervised learning.
    Graph(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ratios(_) => "ratios",
            Command::Solve(_) => "solve",
            Command::Curvature(_) => "curvature",
            Command::Failure(_) => "failure",
            Command::Stoch(_) => "stoch",
            Command::Graph(_) => "graph",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Ratios(a)
            | Command::Solve(a)
            | Command::Curvature(a)
            | Command::Failure(a)
            | Command::Stoch(a)
            | Command::Graph(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long, env = "RSFW_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for replicates and Monte Carlo loops.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Evaluate the full FW gap on saved snapshots after the runs.
    #[arg(long)]
    pub offline_full_gap: bool,
    /// Write SVG plots next to the aggregate CSVs.
    #[arg(long)]
    pub svg: bool,
}

/// State handed to every subcommand.
pub struct Context {
    pub seed: u64,
    pub format: FormatFlags,
    pub out: OutputDir,
}

/// Applies the command-line overrides to a loaded config.
pub fn resolve(cmd: &Command) -> Result<ExperimentConfig, CliError> {
    let args = cmd.args();
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if cfg.experiment.name() != cmd.name() {
        return Err(CliError::Config(format!(
            "config describes a `{}` experiment but `{}` was requested",
            cfg.experiment.name(),
            cmd.name()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    cfg.format.svg |= args.svg;
    cfg.format.offline_full_gap |= args.offline_full_gap;
    Ok(cfg)
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(k) = threads else { return Ok(()) };
    if k == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("cannot start the thread pool: {e}")))
}

/// Runs a parsed command. Returns the one-line report on success.
pub fn execute(cmd: &Command) -> Result<String, CliError> {
    let cfg = resolve(cmd)?;
    configure_threads(cmd.args().threads)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut ctx = Context { seed: cfg.seed, format: cfg.format, out: OutputDir::create(&dir)? };
    // The resolved config makes the output directory self-describing. Its own
    // location is left out so reruns into other directories stay identical.
    let recorded = ExperimentConfig { out: None, ..cfg.clone() };
    ctx.out.write("config.json", &(recorded.to_json() + "\n"))?;
    commands::dispatch(&mut ctx, &cfg.experiment)
}

/// Entry point used by the binary: prints the outcome and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli.command) {
        Ok(report) => {
            println!("{report}");
            0
        }
        Err(e) => {
            eprintln!("rsfw {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
