//! Command-line driver: reads an experiment config, runs one mode, writes CSVs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sparsespike::ErrorClass;

use config::{ExperimentConfig, Mode};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_GENERATION: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "sparsespike", version, about = "Spiked sparse random matrix experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the mode named in the config.
    Run { config: PathBuf },
    /// Closed-form and mean-field predictions.
    Analytic { config: PathBuf },
    /// Population dynamics with the normalisation loop.
    Popdyn { config: PathBuf },
    /// Diagonalise random instances.
    Diag { config: PathBuf },
    /// Component densities from population dynamics.
    Densities { config: PathBuf },
    /// Instances plus theory over the (θ, c) grid.
    Sweep { config: PathBuf },
}

impl Command {
    fn split(self) -> (PathBuf, Option<Mode>) {
        match self {
            Command::Run { config } => (config, None),
            Command::Analytic { config } => (config, Some(Mode::Analytic)),
            Command::Popdyn { config } => (config, Some(Mode::Popdyn)),
            Command::Diag { config } => (config, Some(Mode::Diag)),
            Command::Densities { config } => (config, Some(Mode::Densities)),
            Command::Sweep { config } => (config, Some(Mode::Sweep)),
        }
    }
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Solver => EXIT_SOLVER,
        ErrorClass::Generation => EXIT_GENERATION,
        ErrorClass::Io => EXIT_IO,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (path, mode) = cli.command.split();
    let mut cfg = match ExperimentConfig::load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(m) = mode {
        cfg.mode = m;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.out_dir {
        cfg.out_dir = d;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("config error: --workers must be positive");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_IO);
        }
    }
    let points = match cfg.grid_points() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run::Run::new(cfg, points).execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
