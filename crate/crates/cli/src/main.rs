//! `mcudi` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 usage or configuration
//! error, 3 schema error (e.g. a configured column is missing), 4 data error
//! (empty input, single-class periods, misaligned ground truth, ...).

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use mcudi_core::detectors::DetectorKind;

use crate::config::RunConfig;
use crate::error::{exit, CliError};

#[derive(Parser)]
#[command(
    name = "mcudi",
    version,
    about = "Model-centric, label-free drift indication"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Input CSV with a header row.
    #[arg(long)]
    csv: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Label every period as drift or non-drift from model error rates.
    GroundTruth(DataArgs),
    /// Score detectors against ground truth and simulate retraining strategies.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Detectors to compare; static and periodic are always included.
        #[arg(long, value_delimiter = ',', default_value = "ks,mcudi")]
        detectors: Vec<DetectorKind>,
        /// Precomputed ground truth (JSON lines from `ground-truth`).
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Compare annotation cost of the McUDI pipeline with periodic retraining.
    LabelCost(DataArgs),
    /// Generate a synthetic stream with injected drift, plus a matching config.
    Synth {
        /// Stream specification (TOML).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Date of the first period.
        #[arg(long, default_value = "2023-01-01")]
        start: NaiveDate,
        #[arg(long)]
        out: PathBuf,
    },
}

fn prepare(args: &DataArgs) -> Result<(RunConfig, PathBuf), CliError> {
    let config = RunConfig::load(&args.config)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| config.output_dir.clone());
    Ok((config, out))
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::GroundTruth(args) => {
            let (config, out) = prepare(&args)?;
            commands::ground_truth(&config, &args.csv, &out)
        }
        Command::Evaluate {
            data,
            detectors,
            ground_truth,
        } => {
            let (config, out) = prepare(&data)?;
            commands::evaluate(
                &config,
                &data.csv,
                &detectors,
                ground_truth.as_deref(),
                &out,
            )
        }
        Command::LabelCost(args) => {
            let (config, out) = prepare(&args)?;
            commands::label_cost(&config, &args.csv, &out)
        }
        Command::Synth {
            spec,
            seed,
            start,
            out,
        } => commands::synth(&spec, seed, start, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            });
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::from(exit::OK)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn baselines_are_always_evaluated() {
        assert_eq!(
            commands::detector_set(&[DetectorKind::Mcudi]),
            vec![
                DetectorKind::Static,
                DetectorKind::Periodic,
                DetectorKind::Mcudi
            ]
        );
        assert_eq!(commands::detector_set(&[]).len(), 2);
    }

    #[test]
    fn detector_names_parse() {
        let cli = Cli::try_parse_from([
            "mcudi",
            "evaluate",
            "--config",
            "c.toml",
            "--csv",
            "d.csv",
            "--detectors",
            "mcudi,ks",
        ])
        .unwrap();
        match cli.command {
            Command::Evaluate { detectors, .. } => {
                assert_eq!(detectors, vec![DetectorKind::Mcudi, DetectorKind::Ks])
            }
            _ => panic!("wrong subcommand"),
        }
        assert!(Cli::try_parse_from([
            "mcudi",
            "evaluate",
            "--config",
            "c",
            "--csv",
            "d",
            "--detectors",
            "adwin"
        ])
        .is_err());
    }
}
