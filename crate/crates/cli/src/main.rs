use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use spb::graph::{FeedbackGraph, GraphReport};
use spb::harness::{fit_traces, run_experiment, ExperimentConfig};
use spb::pm::{PmGame, PmReport};
use spb::verify::verify_lemmas;
use spb::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_CONTRACT: u8 = 3;

/// Best-of-both-worlds FTRL experiments with SPB-matching learning rates.
#[derive(Parser)]
#[command(name = "spb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Abort at the first invariant violation.
        #[arg(long)]
        strict: bool,
        /// Worker threads for replicates (default: all cores).
        #[arg(long, value_name = "N")]
        parallel: Option<usize>,
    },
    /// Analyse a partial monitoring game.
    Analyze { game: PathBuf },
    /// Analyse a feedback graph.
    AnalyzeGraph { graph: PathBuf },
    /// Check the learning-rate inequalities on random sequences.
    VerifyLemmas {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
    },
    /// Fit the regret scaling exponent of a directory of trace CSVs.
    Fit {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(Error),
    Contract(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e)
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    println!("{text}");
    Ok(text)
}

fn read_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            strict,
            parallel,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            match run_experiment(&cfg, strict, parallel) {
                Ok((summary, _)) => {
                    print_json(&summary)?;
                    if summary.violations > 0 {
                        eprintln!("warning: {} invariant violations recorded", summary.violations);
                    }
                    Ok(())
                }
                Err(e @ (Error::InvariantViolation { .. } | Error::GammaTooLarge(_) | Error::RTooLarge(_))) => {
                    Err(Failure::Contract(e.to_string()))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Analyze { game } => {
            let game: PmGame = read_json(&game)?;
            game.check()?;
            print_json(&PmReport::from_game(&game)?)?;
            Ok(())
        }
        Command::AnalyzeGraph { graph } => {
            let graph: FeedbackGraph = read_json(&graph)?;
            print_json(&GraphReport::from_graph(&graph)?)?;
            Ok(())
        }
        Command::VerifyLemmas {
            instances,
            seed,
            horizon,
        } => {
            let report = verify_lemmas(seed, instances, horizon)?;
            print_json(&report)?;
            if report.all_passed() {
                Ok(())
            } else {
                Err(Failure::Contract("some inequalities were violated".into()))
            }
        }
        Command::Fit { traces, out } => {
            let report = fit_traces(&traces)?;
            let text = print_json(&report)?;
            if let Some(path) = out {
                fs::write(&path, text).map_err(Error::from)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Contract(msg)) => {
            eprintln!("contract failure: {msg}");
            ExitCode::from(EXIT_CONTRACT)
        }
    }
}
