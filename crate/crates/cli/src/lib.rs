//! The `levy-conditioner` batch front end.

pub mod config;
pub mod jobs;

use std::path::Path;

use thiserror::Error;

pub use config::JobConfig;
pub use jobs::{run_job, Outcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<levy_conditioning::Error> for CliError {
    fn from(e: levy_conditioning::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_DIAGNOSTIC: i32 = 4;

/// Options given on the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<std::path::PathBuf>,
    pub seed_override: Option<u64>,
    pub threads: Option<usize>,
}

/// Runs the job in `config_path` and returns the process exit code.
/// Messages go to stderr prefixed with the configuration path.
pub fn run(config_path: &Path, opts: &RunOptions) -> i32 {
    match run_inner(config_path, opts) {
        Ok(outcome) if outcome.failures > 0 => {
            eprintln!(
                "{}: {} verification record(s) with |z| > {}",
                config_path.display(),
                outcome.failures,
                jobs::Z_FAIL
            );
            EXIT_DIAGNOSTIC
        }
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("{}: {e}", config_path.display());
            e.exit_code()
        }
    }
}

fn run_inner(config_path: &Path, opts: &RunOptions) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| CliError::Validation(format!("cannot read config: {e}")))?;
    let cfg = JobConfig::parse(&text)?;
    let out_dir = opts.out_dir.clone().unwrap_or_else(|| std::path::PathBuf::from("."));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Validation(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_job(&cfg, &out_dir, opts.seed_override))
}
