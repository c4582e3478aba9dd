//! `tsrep` command-line driver.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags or configuration),
//! 2 on data errors (unreadable or invalid inputs, failed computations).

mod commands;
mod pipeline;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::*;
use pipeline::UsageError;

#[derive(Parser, Debug)]
#[command(name = "tsrep", version, about = "Time-series classification from frozen sequence-model hidden states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the baseline-shifted sine toy dataset
    GenToy(GenToyArgs),
    /// Generate a two-cluster Gaussian suite member
    GenBlobs(GenBlobsArgs),
    /// Embed a dataset and write one feature vector per sample
    Embed(EmbedArgs),
    /// Train on one train split and score its test split
    TrainEval(TrainEvalArgs),
    /// Run the configuration × dataset matrix and write a report
    Benchmark(BenchmarkArgs),
    /// Sweep an aggregation or augmentation grid
    Ablate(AblateArgs),
    /// Ranks, pairwise tests and CD groups from a scores CSV
    Analyze(AnalyzeArgs),
    /// Project embeddings onto their principal components
    Pca(PcaArgs),
    /// Render results tables or CD plot data
    Report(ReportArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenToy(a) => gen_toy(&a),
        Command::GenBlobs(a) => gen_blobs(&a),
        Command::Embed(a) => embed(&a),
        Command::TrainEval(a) => train_eval(&a),
        Command::Benchmark(a) => benchmark(&a),
        Command::Ablate(a) => ablate(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Pca(a) => pca(&a),
        Command::Report(a) => report(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TSREP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
