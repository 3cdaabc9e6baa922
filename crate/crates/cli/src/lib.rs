//! Command-line front end for `gptlab`: conductivity specifications, GPT
//! table files and the forward, reconstruction, sensitivity and far-field
//! drivers.

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;
pub mod gptfile;
pub mod plot;
pub mod sigma;

pub use config::{Args, RunConfig, Task};
pub use error::{CliError, CliResult};

/// Caps the worker pool at `GPTLAB_THREADS` when that is set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("GPTLAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "GPTLAB_THREADS must be a positive integer, got '{value}'"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))
}

pub fn run(args: &Args) -> CliResult<serde_json::Value> {
    configure_threads()?;
    commands::run(&RunConfig::from_args(args)?)
}
