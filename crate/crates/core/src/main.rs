use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fock_lab::cli::{run, Status};

/// Truncated Toeplitz operators on the Fock space, driven by one config file.
#[derive(Parser, Debug)]
#[command(name = "fock-lab", version)]
struct Args {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random test vectors; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (status, message) = run(&args.config, args.out, args.seed);
    match status {
        Status::Success => println!("{message}"),
        _ => eprintln!("{message}"),
    }
    ExitCode::from(status as u8)
}
