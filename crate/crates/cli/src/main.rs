//! `attrib`: influence-score computation and reproducible experiments from
//! the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/runtime error.

mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "attrib",
    about = "Training-data attribution via influence scores, with convergence and inversion benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic inverse-approximation convergence sweep over (dim, samples).
    Converge(commands::ConvergeArgs),
    /// Error/time comparison of inversion methods against Gaussian elimination.
    InvertBench(commands::InvertBenchArgs),
    /// Score a gradient dump with the selected estimators.
    Score(commands::ScoreArgs),
    /// Mislabeled-data detection on the built-in toy task.
    Detect(commands::DetectArgs),
    /// Data-selection experiment (retrain on top-k% subsets).
    Select(commands::SelectArgs),
    /// Generate a synthetic gradient dump (manifest + binary payloads).
    GenDump(commands::GenDumpArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap prints help to stdout, errors to stderr
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Converge(args) => commands::converge(args),
        Command::InvertBench(args) => commands::invert_bench(args),
        Command::Score(args) => commands::score(args),
        Command::Detect(args) => commands::detect(args),
        Command::Select(args) => commands::select(args),
        Command::GenDump(args) => commands::gen_dump(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &attrib_core::Error) -> u8 {
    use attrib_core::Error;
    match e {
        Error::InvalidConfig(_) => 1,
        _ => 2,
    }
}
