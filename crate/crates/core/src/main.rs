//! Batch front end: `balayage run <config>` executes scenario files,
//! `balayage verify` runs the acceptance battery.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use balayage_core::{acceptance, scenario};

#[derive(Parser)]
#[command(name = "balayage", version, about = "Partial balayage on discrete manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory for summaries and CSV dumps.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Seed for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of scenarios run in parallel.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every scenario of a JSON config file.
    Run { config: PathBuf },
    /// Run the acceptance battery (optionally filtered by module name).
    Verify {
        #[arg(long)]
        filter: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => {
            let parsed = match scenario::load_config(&config) {
                Ok(parsed) => parsed,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let _seed = cli.seed.or(parsed.seed).unwrap_or(42);
            match scenario::run_config(&parsed, &cli.out, cli.threads) {
                Ok(outcome) => {
                    for s in &outcome.scenarios {
                        match &s.error {
                            Some(e) => println!("scenario {:<24} ERROR: {e}", s.name),
                            None => println!(
                                "scenario {:<24} {}",
                                s.name,
                                if !s.converged {
                                    "NOT CONVERGED"
                                } else if s.checks_passed {
                                    "ok"
                                } else {
                                    "CHECK FAILED"
                                }
                            ),
                        }
                    }
                    outcome.exit_code()
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        Command::Verify { filter } => {
            let seed = cli.seed.unwrap_or(42);
            let reports = acceptance::run_all(filter.as_deref(), seed);
            if reports.is_empty() {
                eprintln!("error: no criteria match the filter");
                1
            } else {
                acceptance::exit_code(&reports)
            }
        }
    };
    ExitCode::from(code as u8)
}
