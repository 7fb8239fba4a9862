use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod align;
mod baseline;
mod config;
mod detect;
mod eval;
mod fail;
mod files;
mod report;
mod synth;

/// Milestone detection over team meeting transcripts.
///
/// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
/// 3 backend error.
#[derive(Debug, Parser)]
#[command(name = "milestones", version)]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Align long-form monologues onto a short-fragment skeleton.
    Align(align::AlignArgs),
    /// Run chunked LLM detection for every team and trial.
    Detect(config::RunArgs),
    /// Rank utterances by embedding similarity and emit top-k proposals.
    Baseline(config::RunArgs),
    /// Score predictions against ground truth.
    Eval(eval::EvalArgs),
    /// Print an evaluation as a table.
    Report(report::ReportArgs),
    /// Write synthetic transcripts and ground truth.
    Synth(synth::SynthArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    let result = match &cli.command {
        Command::Align(a) => align::run(a),
        Command::Detect(a) => detect::run(a),
        Command::Baseline(a) => baseline::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Report(a) => report::run(a),
        Command::Synth(a) => synth::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.exit_code()
        }
    }
}
