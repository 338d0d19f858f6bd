//! `ottm` — train, inspect, and evaluate optimal-transport topic models.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration (exit 1).
    Usage(String),
    /// Invalid or inconsistent input data (exit 2).
    Data(String),
    /// Numerical failure (exit 3).
    Numerical(String),
    /// A verification suite found a violation (exit 4).
    Verification(String),
}

impl From<ottm_core::Error> for CliError {
    fn from(e: ottm_core::Error) -> Self {
        match e {
            ottm_core::Error::Numerical(m) => CliError::Numerical(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Data(m)
            | CliError::Numerical(m)
            | CliError::Verification(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ottm",
    version,
    about = "Optimal-transport topic modeling: ingest corpora, train, infer, \
             extract topics, evaluate, and verify numerical properties"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct ConfigArgs {
    /// Config file with one `key = value` per line (# comments allowed).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single config key, e.g. --set alpha=10. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn build(&self) -> Result<RunConfig, CliError> {
        RunConfig::assemble(self.config.as_deref(), &self.set)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a canonical corpus directory (vocab + Matrix Market counts).
    Ingest(commands::ingest::IngestArgs),
    /// Train a model and persist the artifact directory.
    Train(commands::train::TrainArgs),
    /// Write per-document topic distributions for a corpus.
    Infer(commands::infer::InferArgs),
    /// List each topic's closest words; optionally export topic embeddings.
    Topics(commands::topics::TopicsArgs),
    /// Run the evaluation protocol and write a plot-ready report.
    Eval(commands::eval::EvalArgs),
    /// Run a randomized verification suite; nonzero exit on violation.
    Verify(commands::verify::VerifyArgs),
    /// List every config key with its default and meaning.
    ConfigKeys,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful exits; anything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest::run(&args),
        Command::Train(args) => commands::train::run(&args),
        Command::Infer(args) => commands::infer::run(&args),
        Command::Topics(args) => commands::topics::run(&args),
        Command::Eval(args) => commands::eval::run(&args),
        Command::Verify(args) => commands::verify::run(&args),
        Command::ConfigKeys => {
            for (key, default, doc) in RunConfig::describe_keys() {
                println!("{key} = {default}\n    {doc}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
