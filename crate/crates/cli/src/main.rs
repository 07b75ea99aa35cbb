use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levy_conditioner::{run, RunOptions};

#[derive(Parser)]
#[command(name = "levy-conditioner", version, about = "Harmonic functions and conditioned dynamics for Lévy processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the job described by a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
        /// Worker threads (default: logical cores).
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LEVY_COND_LOG", "warn")).init();
    let cli = Cli::parse();
    let Command::Run {
        config,
        out_dir,
        seed_override,
        threads,
    } = cli.command;
    let code = run(
        &config,
        &RunOptions {
            out_dir,
            seed_override,
            threads,
        },
    );
    ExitCode::from(code as u8)
}
