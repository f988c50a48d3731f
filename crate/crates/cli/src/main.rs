use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use comove::report::{run, RunConfig, RunError, RunOptions, Stage};
use comove::synthetic::{generate_prices, write_price_csv, SyntheticConfig};

/// Change-point and herding analysis of daily price panels.
#[derive(Debug, Parser)]
#[command(name = "comove", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline described by a TOML config and write the report bundle.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run only this stage: describe, tests, dependence, cpd, herding, sensitivity or plots.
        #[arg(long, value_parser = parse_stage)]
        stage: Option<Stage>,
        /// Comma-separated absolute penalties for the change-point sweep table.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        sweep: Option<Vec<f64>>,
    },
    /// Write a seeded synthetic price CSV with six assets and an SPX benchmark.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Number of daily returns.
        #[arg(long, default_value_t = 1500)]
        days: usize,
    },
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse()
}

const EXIT_PARTIAL: u8 = 1;
const EXIT_VALIDATION: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run {
            config,
            out,
            stage,
            sweep,
        } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    error!("{e}");
                    return ExitCode::from(EXIT_VALIDATION);
                }
            };
            let options = RunOptions {
                stage,
                sweep,
                out_dir: out,
            };
            match run(&cfg, &options) {
                Ok(summary) if summary.is_complete() => {
                    info!(
                        "wrote {} files to {}",
                        summary.manifest.files.len(),
                        summary.out_dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Ok(summary) => {
                    error!(
                        "finished with failures; partial results in {} (see manifest.json)",
                        summary.out_dir.display()
                    );
                    ExitCode::from(EXIT_PARTIAL)
                }
                Err(e @ RunError::Validation(_)) => {
                    error!("{e}");
                    ExitCode::from(EXIT_VALIDATION)
                }
                Err(e) => {
                    error!("{e}");
                    ExitCode::from(EXIT_PARTIAL)
                }
            }
        }
        Command::Synth { out, seed, days } => {
            let cfg = SyntheticConfig {
                seed,
                n_returns: days,
                ..SyntheticConfig::default()
            };
            match generate_prices(&cfg).and_then(|s| write_price_csv(&s, &out)) {
                Ok(()) => {
                    info!("wrote {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    error!("{e}");
                    ExitCode::from(EXIT_VALIDATION)
                }
            }
        }
    }
}
