use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use confuse_cli::{cmd_features, cmd_forecast, cmd_selfcheck, cmd_trade, cmd_train, exit, CliError, Overrides, RunConfig};
use confuse_core::data::synthetic::write_synthetic_dir;

/// Convolutional transform learning fusion for daily stock data.
///
/// Exit codes: 0 success, 2 configuration, 3 data, 4 numerical failure,
/// 5 file or IO, 6 selfcheck failure.
#[derive(Parser)]
#[command(name = "confuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value config file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per stock and write model.cfm and loss_trace.csv
    Train(RunArgs),
    /// Ridge forecasts of next-day values with MAE reports
    Forecast(RunArgs),
    /// Random forest BUY/SELL decisions with classification and return reports
    Trade(RunArgs),
    /// Export learned codes for the train and test windows
    Features(RunArgs),
    /// Run the gradient, prox, convolution, log-det and AUC oracle suites
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write seeded synthetic stock CSV files
    Synth {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 3)]
        stocks: usize,
        #[arg(long, default_value_t = 500)]
        days: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn resolve(args: &RunArgs) -> Result<RunConfig, CliError> {
    RunConfig::resolve(args.config.as_deref(), &args.overrides)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => {
            let cfg = resolve(&a)?;
            for s in cmd_train(&cfg)? {
                println!(
                    "{}: {} epochs, loss {} -> {}",
                    s.symbol,
                    s.epochs,
                    s.initial_loss,
                    s.final_loss.map_or("-".into(), |l| l.to_string())
                );
            }
        }
        Command::Forecast(a) => {
            let cfg = resolve(&a)?;
            print!("{}", cmd_forecast(&cfg)?.average.to_key_value());
        }
        Command::Trade(a) => {
            let cfg = resolve(&a)?;
            print!("{}", cmd_trade(&cfg)?.average.to_key_value());
        }
        Command::Features(a) => {
            let cfg = resolve(&a)?;
            for p in cmd_features(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Selfcheck { seed } => {
            let report = cmd_selfcheck(seed)?;
            print!("{}", report.to_text());
            if !report.passed() {
                return Err(CliError::SelfcheckFailed);
            }
        }
        Command::Synth { dir, stocks, days, seed } => {
            for p in write_synthetic_dir(&dir, stocks, days, seed).map_err(|e| CliError::core("synth", e))? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
