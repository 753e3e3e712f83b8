//! `wdro-mpc`: solve, simulate and inspect distributionally robust MPC
//! experiments described by a JSON config.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 infeasible tightened
//! problem, 3 outer iteration did not converge, 4 numerical failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::ModeName;
use crate::error::{CliError, EXIT_OK, EXIT_USAGE};

#[derive(Parser)]
#[command(
    name = "wdro-mpc",
    version,
    about = "Wasserstein distributionally robust MPC via iterative LQR"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON).
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,

    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Gain mode; overrides `gain_mode` from the config.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,

    /// Seed for simulation or tube perturbation draws.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of realizations (simulate) or perturbation draws (tube).
    #[arg(long, global = true)]
    runs: Option<usize>,

    /// Size of the worker pool.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON-lines progress on stderr.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the tightened problem and write trajectory, gains and back-offs.
    Solve,
    /// Monte-Carlo closed-loop simulation of solved plans.
    Simulate,
    /// Wasserstein tube radii and their validation on coupled perturbations.
    Tube,
    /// Gains and back-offs along a given or default trajectory, without solving.
    Backoff {
        /// Trajectory CSV; defaults to the closed-loop LQR rollout from `x0`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Riccati,
    Fixed,
    Zero,
    All,
}

fn run(cli: Cli) -> Result<u8, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let exp = config::load(&cli.config)?;
    let modes = match cli.mode {
        None => vec![exp.gain_mode],
        Some(ModeArg::Riccati) => vec![ModeName::Riccati],
        Some(ModeArg::Fixed) => vec![ModeName::Fixed],
        Some(ModeArg::Zero) => vec![ModeName::Zero],
        Some(ModeArg::All) if exp.fixed_gain.is_some() => {
            vec![ModeName::Riccati, ModeName::Fixed, ModeName::Zero]
        }
        Some(ModeArg::All) => vec![ModeName::Riccati, ModeName::Zero],
    };
    let out = cli
        .out
        .or_else(|| exp.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = commands::Context {
        exp,
        out,
        modes,
        seed: cli.seed,
        runs: cli.runs,
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Tube => commands::tube(&ctx),
        Command::Backoff { trajectory } => commands::backoff(&ctx, trajectory.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
