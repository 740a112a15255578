use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fvp_cli::{run, Command, RunConfig};

/// Compatibility checks and backward solutions for parabolic final value problems.
#[derive(Debug, Parser)]
#[command(name = "fvp", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON problem file.
    #[arg(long)]
    problem: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Domain-membership tolerance τ.
    #[arg(long)]
    tol: Option<f64>,
    /// Truncation levels, e.g. `32,64,128`.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = RunConfig {
        command: cli.command,
        problem: cli.problem,
        out: cli.out,
        seed: cli.seed,
        tol: cli.tol,
        levels: cli.levels,
    };
    match run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fvp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
