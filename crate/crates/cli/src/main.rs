//! `sparqlgen`: one subcommand per pipeline stage. Every stage reads its
//! inputs from the run's output directory (or the dataset files) and writes
//! only into that directory.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use artifacts::{MissingInput, Split};
use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "sparqlgen", version, about = "Question-to-SPARQL generation pipeline")]
struct Cli {
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output_dir` from the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides `endpoint.url` from the config.
    #[arg(long, global = true)]
    endpoint_url: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the dataset, fetch labels, write records, sentinel table, splits
    /// and per-fold sample files, and print corpus statistics.
    Prepare,
    /// Train the pointer-generator on a fold's training samples.
    Train {
        #[arg(long, default_value_t = 0)]
        fold: usize,
    },
    /// Beam-decode a split of a fold with the trained model.
    Decode {
        #[arg(long, default_value_t = 0)]
        fold: usize,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
    },
    /// Train the reranker on executed training-split beams.
    TrainReranker {
        #[arg(long, default_value_t = 0)]
        fold: usize,
    },
    /// Execute test-split beams and gold queries and score the answers.
    Evaluate {
        #[arg(long, default_value_t = 0)]
        fold: usize,
        /// Order beams with the trained reranker instead of beam order.
        #[arg(long)]
        rerank: bool,
    },
    /// Print error-category counts of an evaluation, or of a JSON file of
    /// gold/prediction pairs.
    AnalyzeErrors {
        #[arg(long, default_value_t = 0)]
        fold: usize,
        #[arg(long)]
        rerank: bool,
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let overrides = Overrides { seed: cli.seed, output_dir: cli.output_dir, endpoint_url: cli.endpoint_url };
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Prepare => commands::prepare(&cfg),
        Command::Train { fold } => commands::train_model(&cfg, fold),
        Command::Decode { fold, split } => commands::decode(&cfg, fold, split),
        Command::TrainReranker { fold } => commands::train_reranker_cmd(&cfg, fold),
        Command::Evaluate { fold, rerank } => commands::evaluate_cmd(&cfg, fold, rerank),
        Command::AnalyzeErrors { fold, rerank, pairs } => commands::analyze_errors(&cfg, fold, rerank, pairs),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<MissingInput>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
