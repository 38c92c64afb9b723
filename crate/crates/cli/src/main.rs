//! `symlab` command-line driver.
//!
//! Every command reads an optional JSON config, applies flag overrides,
//! writes its artifacts into `--out` and leaves a `resolved_config.json`
//! snapshot beside them.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use run::{exit_code, RunContext};

#[derive(Parser, Debug)]
#[command(name = "symlab", version, about = "Symmetry-breaking experiments")]
struct Cli {
    /// JSON run config for the chosen command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SYMLAB_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sampled Ising energy landscapes with and without a field.
    Ising {
        #[arg(long)]
        side: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Input-dimension expansion of a tensor file, or a sweep over factors
    /// and fills.
    Expand {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Expansion factor; repeat for a sweep.
        #[arg(long = "factor")]
        factors: Vec<usize>,
        /// Fill value or `random`; repeat for a sweep.
        #[arg(long = "fill")]
        fills: Vec<String>,
        /// Kernel size of the first convolution, for the factor check.
        #[arg(long)]
        first_kernel: Option<usize>,
    },
    /// Exhaustive ±1 loss landscapes of tiny networks.
    Enumerate {
        #[arg(long, value_enum)]
        preset: Option<commands::enumerate::Preset>,
    },
    /// Replica-distance comparison of the five CNN variants.
    Replica {
        #[arg(long, value_enum)]
        preset: Option<commands::replica::Preset>,
        /// Replica weight cache (default: OUT/cache).
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Quasi-particle equation of state.
    Qcd {
        #[arg(value_enum)]
        mode: QcdMode,
        /// Target EoS CSV for `fit`; a synthetic table is used otherwise.
        #[arg(long)]
        target: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum QcdMode {
    Eos,
    Fit,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = RunContext {
        config: cli.config,
        seed: cli.seed,
        workers: cli.workers,
        out: cli.out,
    };
    let result = ctx.init_workers().and_then(|()| match cli.command {
        Command::Ising { side, count } => commands::ising::run(&ctx, side, count),
        Command::Expand {
            input,
            factors,
            fills,
            first_kernel,
        } => commands::expand::run(&ctx, input, factors, fills, first_kernel),
        Command::Enumerate { preset } => commands::enumerate::run(&ctx, preset),
        Command::Replica { preset, cache } => commands::replica::run(&ctx, preset, cache),
        Command::Qcd { mode, target } => match mode {
            QcdMode::Eos => commands::qcd::eos(&ctx),
            QcdMode::Fit => commands::qcd::fit(&ctx, target),
        },
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
