mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lcf_core::Error;

use config::{ConfigArgs, Precision, RunConfig};

/// Grid traffic simulation and learned link-speed estimation.
///
/// Settings come from built-in defaults, then `--config`, then flags.
#[derive(Debug, Parser)]
#[command(name = "lcf", version)]
struct Cli {
    /// `key = value` settings file; keys are the flag names below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,

    #[command(flatten)]
    settings: ConfigArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the grid network and its base OD matrix.
    GenNetwork,
    /// Simulate every scenario and write the dataset with its splits.
    GenDataset,
    /// Simulate one run of the network, empty unless `--od` is given.
    Simulate,
    /// Cluster links from a record, or from the dataset's reference record.
    Partition,
    /// Train `--model` and write its checkpoint.
    Train,
    /// Speed errors of every model on the test split.
    Evaluate,
    /// Trip travel-time errors of every model on the test split.
    TravelTime,
    /// Run every stage and write both reports.
    Report,
}

fn init_logging(level: log::LevelFilter) {
    env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, record| {
            writeln!(
                buf,
                "level={} target={} {}",
                record.level().as_str().to_ascii_lowercase(),
                record.target(),
                record.args()
            )
        })
        .init();
}

fn run(cli: &Cli) -> lcf_core::Result<()> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), &cli.settings)?;
    macro_rules! typed {
        ($f:ident) => {
            match cfg.precision {
                Precision::F32 => commands::$f::<f32>(&cfg),
                Precision::F64 => commands::$f::<f64>(&cfg),
            }
        };
    }
    match cli.command {
        Command::GenNetwork => commands::gen_network(&cfg),
        Command::GenDataset => commands::gen_dataset(&cfg),
        Command::Simulate => commands::simulate_once(&cfg),
        Command::Partition => commands::partition(&cfg),
        Command::Train => typed!(train_model),
        Command::Evaluate => typed!(evaluate),
        Command::TravelTime => typed!(travel_time),
        Command::Report => typed!(report),
    }
}

/// 1 for bad input, 2 for failures while running.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } | Error::Validation(_) | Error::Argument(_) | Error::Io { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.log_level);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
