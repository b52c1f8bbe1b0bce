mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::Failure;
use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "sideband",
    version,
    about = "Simulate, measure and reconstruct two-sideband Gaussian states"
)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Noise seed, overriding `noise.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the summary on standard output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanTechnique {
    Hd,
    Rd,
    RdLocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitModel {
    Hd,
    RdPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WignerMode {
    Upper,
    Lower,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Prepare the configured state; writes NAME.json and NAME_energy.json.
    Prepare {
        #[arg(long, default_value = "state")]
        name: String,
    },
    /// Simulate a scan of a state file.
    Scan {
        #[arg(value_enum)]
        technique: ScanTechnique,
        #[arg(long)]
        state: PathBuf,
        /// Output stem; defaults to the technique name.
        #[arg(long)]
        name: Option<String>,
    },
    /// Fit a scan curve (CSV or JSON).
    Fit {
        #[arg(value_enum)]
        model: FitModel,
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
    /// Reconstruct the full covariance from a phase-locked scan.
    Reconstruct {
        #[arg(long)]
        locked: PathBuf,
        /// Correct the estimate into the physical cone.
        #[arg(long)]
        project: bool,
        #[arg(long, default_value = "reconstruction")]
        name: String,
    },
    /// Chi-square comparison of two curves.
    Compare {
        curve_a: PathBuf,
        curve_b: PathBuf,
        #[arg(long, default_value = "comparison")]
        name: String,
    },
    /// Sample single-mode Wigner functions of a state on a grid.
    Wigner {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        mode: WignerMode,
        /// Half width of the square grid; sized from the widest marginal when omitted.
        #[arg(long)]
        span: Option<f64>,
        #[arg(long, default_value_t = 81)]
        count: usize,
        #[arg(long, default_value = "wigner")]
        name: String,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = RunConfig::load(cli.config.as_deref(), std::env::vars()).map_err(Failure::Config)?;
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        config.noise.seed = Some(seed);
    }
    let ctx = commands::Context {
        config,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Prepare { name } => commands::prepare(&ctx, &name),
        Command::Scan { technique, state, name } => commands::scan(&ctx, technique, &state, name.as_deref()),
        Command::Fit { model, curve, name } => commands::fit(&ctx, model, &curve, name.as_deref()),
        Command::Reconstruct { locked, project, name } => commands::reconstruct(&ctx, &locked, project, &name),
        Command::Compare { curve_a, curve_b, name } => commands::compare(&ctx, &curve_a, &curve_b, &name),
        Command::Wigner {
            state,
            mode,
            span,
            count,
            name,
        } => commands::wigner(&ctx, &state, mode, span, count, &name),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
