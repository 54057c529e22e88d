use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;

use config::RunConfig;
use error::CliError;

/// Low-frequency acoustic scattering by impedance obstacles.
#[derive(Debug, Parser)]
#[command(name = "scatterer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues of the Neumann-to-Dirichlet operator over the k grid.
    Spectrum(Common),
    /// Plane-wave scattering: far field and cross-section per k.
    Scatter(Common),
    /// Springy-coating resonance prediction and refinement.
    Resonances(Common),
    /// Far-field operator and scattering matrix per k.
    Smatrix(Common),
    /// Oracle and invariant check suite.
    Validate(Common),
    /// Convergence of impedance solutions to the sound-soft solution.
    DirichletLimit(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

type CommandFn = fn(&RunConfig, &std::path::Path) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, command): (&Common, CommandFn) = match &cli.command {
        Command::Spectrum(c) => (c, commands::spectrum),
        Command::Scatter(c) => (c, commands::scatter),
        Command::Resonances(c) => (c, commands::resonances),
        Command::Smatrix(c) => (c, commands::smatrix),
        Command::Validate(c) => (c, commands::validate),
        Command::DirichletLimit(c) => (c, commands::dirichlet_limit),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let config = RunConfig::load(&common.config)?;
    let out = common
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set `output_dir`".into()))?;
    std::fs::create_dir_all(&out).map_err(|e| CliError::Output(format!("{}: {e}", out.display())))?;
    command(&config, &out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
