use std::path::PathBuf;
use std::process::ExitCode;

use cfdist::{load_config, run, Command, Overrides};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cfdist", version, about = "Counterfactual distributions, effects and decompositions")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON).
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Fit the configured estimator on one group.
    Fit(Common),
    /// Counterfactual distributions, effects, bands and tests.
    Counterfactual(Common),
    /// Sequential decomposition of the change between the two groups.
    Decompose(Common),
    /// Dump the bootstrap draw matrix.
    BandsAudit(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Fit(c) => (Command::Fit, c),
        Sub::Counterfactual(c) => (Command::Counterfactual, c),
        Sub::Decompose(c) => (Command::Decompose, c),
        Sub::BandsAudit(c) => (Command::BandsAudit, c),
    };
    let overrides = Overrides { seed: common.seed, output_dir: common.output_dir };
    let result = load_config(&common.config).and_then(|loaded| run(command, &loaded, &overrides, common.threads));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
