//! Command-line front end of `cfdist-core`: JSON run configuration, CSV
//! input, and deterministic JSON/CSV outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod output;

use std::path::PathBuf;

pub use commands::{cmd_bands_audit, cmd_counterfactual, cmd_decompose, cmd_fit, Context, Overrides};
pub use config::{load_config, parse_config, LoadedConfig, RunConfig};
pub use error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Counterfactual,
    Decompose,
    BandsAudit,
}

/// Runs one subcommand on a worker pool of `threads` threads (all cores
/// when `None`). Returns the files written.
pub fn run(command: Command, loaded: &LoadedConfig, overrides: &Overrides, threads: Option<usize>) -> CliResult<Vec<PathBuf>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        let ctx = Context::prepare(loaded, overrides)?;
        match command {
            Command::Fit => cmd_fit(&ctx),
            Command::Counterfactual => cmd_counterfactual(&ctx),
            Command::Decompose => cmd_decompose(&ctx),
            Command::BandsAudit => cmd_bands_audit(&ctx),
        }
    })
}
