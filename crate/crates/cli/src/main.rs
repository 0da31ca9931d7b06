//! `pcdag`: simulate, estimate, tune and benchmark sparse covariance estimators.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.

mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use crate::commands::{execute, Command};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "pcdag", version, about)]
struct Cli {
    /// Worker threads for replicate-level parallelism (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    pool.install(|| execute(cli.command))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pcdag: {e}");
            e.exit_code()
        }
    }
}
