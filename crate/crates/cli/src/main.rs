use std::path::PathBuf;
use std::process::ExitCode;

use biym::commands::{self, Context};
use biym::{exit, CliError, RunConfig};
use clap::{Parser, Subcommand};

/// Yang–Mills–Born–Infeld lattice laboratory.
#[derive(Parser, Debug)]
#[command(name = "biym", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Connection snapshot to read.
    #[arg(long, global = true)]
    snapshot: Option<PathBuf>,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for every random draw (overrides the `seeds` section).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Check every identity on seeded random inputs.
    Verify,
    /// Minimize the configured density by gradient descent.
    Flow,
    /// Flow, then build the conformal factor and compare residuals.
    Conformal,
    /// Lowest Hessian eigenvalues, index and nullity of a snapshot.
    Spectrum,
    /// Stress-energy tensor and its divergence for a snapshot.
    Stress,
    /// Dump a snapshot as CSV.
    Export,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("BIYM_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("BIYM_THREADS must be a non-negative integer, got {raw:?}")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, CliError> {
    init_threads()?;
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    let ctx = Context::new(config, cli.snapshot, cli.out, cli.quiet);
    match cli.command {
        Command::Verify => commands::verify(&ctx),
        Command::Flow => commands::flow(&ctx),
        Command::Conformal => commands::conformal(&ctx),
        Command::Spectrum => commands::spectrum_cmd(&ctx),
        Command::Stress => commands::stress(&ctx),
        Command::Export => commands::export(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code().max(exit::FAILURE))
        }
    }
}
