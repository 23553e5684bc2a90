//! `had-dm run <config.json> [--set k=v ...]` and `had-dm validate <config.json>`.
//!
//! Exit codes: 0 success, 2 schema or invariant violation, 3 numerical
//! failure while running.

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, SchemaError};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("HAD_DM_GIT_DESCRIBE"));

#[derive(Parser)]
#[command(name = "had-dm", version = VERSION, about = "HAD array DOA estimation and robust DM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override a config field, e.g. `--set scenario.beta=0.8`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
    /// Check a config without running anything.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
}

fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|e| SchemaError {
        path: String::new(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| SchemaError {
        path: String::new(),
        message: format!("invalid JSON in {}: {e}", path.display()),
    })?;
    for o in overrides {
        config::apply_override(&mut value, o)?;
    }
    let cfg = config::parse(value)?;
    cfg.validate()?;
    Ok(cfg)
}

fn schema_failure(e: SchemaError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn numerical_failure(e: had_dm::Error) -> ExitCode {
    eprintln!("error in {}: {e}", e.origin());
    ExitCode::from(3)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config, overrides } => match load(&config, &overrides) {
            Ok(_) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => schema_failure(e),
        },
        Command::Run { config, overrides } => {
            let cfg = match load(&config, &overrides) {
                Ok(c) => c,
                Err(e) => return schema_failure(e),
            };
            let started = Instant::now();
            let pool = match had_dm::perf::thread_pool() {
                Ok(p) => p,
                Err(e) => return numerical_failure(e),
            };
            let result = pool
                .install(|| run::execute(&cfg))
                .and_then(|out| run::emit(&cfg, &out, started, pool.current_num_threads()));
            match result {
                Ok(emitted) => {
                    println!("{}", emitted.data.display());
                    println!("{}", emitted.meta.display());
                    ExitCode::SUCCESS
                }
                Err(e) => numerical_failure(e),
            }
        }
    }
}
