//! `bspde` — solve catalog problems and run convergence/regularity studies
//! from a JSON config.
//!
//! Exit status: 0 on success, 2 when the config cannot be read or fails
//! validation, 1 when a run is rejected or fails. Errors are emitted to
//! stderr as one JSON record `{"error": {"code": ..., "message": ...}}`.
//!
//! `BSPDE_THREADS` caps the worker thread count; results are byte-identical
//! for any value.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "bspde", version, about = "Backward stochastic heat equation solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run configuration (a previously emitted report also works).
    #[arg(long)]
    config: PathBuf,
    /// Replace the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the output stem from the config.
    #[arg(long)]
    output: Option<String>,
    /// Run past the spectral stiffness bound; the report records it.
    #[arg(long)]
    override_cfl: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve once and summarize the time-zero solution.
    Solve(CommonArgs),
    /// Refine the spatial mode count against a finer reference.
    ConvergeSpace(CommonArgs),
    /// Refine the time step count against a reference trajectory.
    ConvergeTime(CommonArgs),
    /// Probe mean squared increments of a solved process by lag.
    Regularity(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Solve(a)
            | Command::ConvergeSpace(a)
            | Command::ConvergeTime(a)
            | Command::Regularity(a) => a,
        }
    }
}

fn configure_threads() -> bspde::Result<()> {
    let Ok(raw) = std::env::var("BSPDE_THREADS") else {
        return Ok(());
    };
    let count: usize = raw.parse().map_err(|_| {
        bspde::Error::InvalidArgument(format!(
            "BSPDE_THREADS must be a positive integer, got '{raw}'"
        ))
    })?;
    if count == 0 {
        return Err(bspde::Error::InvalidArgument(
            "BSPDE_THREADS must be a positive integer, got '0'".into(),
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(count)
        .build_global()
        .map_err(|e| bspde::Error::InvalidArgument(format!("thread pool setup failed: {e}")))
}

fn execute(cli: &Cli) -> bspde::Result<Vec<PathBuf>> {
    let args = cli.command.args();
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(output) = &args.output {
        config.output_path = output.clone();
    }
    if args.override_cfl {
        config.override_cfl = true;
    }
    match &cli.command {
        Command::Solve(_) => commands::run_solve(&config),
        Command::ConvergeSpace(_) => commands::run_converge_space(&config),
        Command::ConvergeTime(_) => commands::run_converge_time(&config),
        Command::Regularity(_) => commands::run_regularity(&config),
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| execute(&cli));
    match outcome {
        Ok(written) => {
            for path in written {
                println!("wrote {}", path.display());
            }
        }
        Err(err) => {
            let record = serde_json::json!({
                "error": {"code": err.code(), "message": err.to_string()}
            });
            eprintln!("{record}");
            let status = match err {
                bspde::Error::InvalidArgument(_) | bspde::Error::MalformedFile(_) => 2,
                _ => 1,
            };
            std::process::exit(status);
        }
    }
}
