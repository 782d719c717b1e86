//! Command line front end for the forest engine.
//!
//! The default mode trains on a delimited text file and prints a summary
//! block; `--write` stores the forest and `--predict` applies a stored
//! forest to new data. The `bench` and `validate` subcommands drive the
//! scaling harness and the out-of-bag agreement protocol.

mod harness;
mod predict;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grove_core::data::MemoryMode;
use grove_core::{GroveError, Result};

#[derive(Parser)]
#[command(
    name = "grove",
    version,
    about = "Random forests: train, evaluate, store and apply",
    args_conflicts_with_subcommands = true
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    main: MainArgs,
}

#[derive(Args, Debug)]
struct MainArgs {
    /// Training or prediction data: delimited text with a header line.
    #[arg(long)]
    file: Option<PathBuf>,

    /// Dependent variable column; for survival forests the time column.
    #[arg(long)]
    depvarname: Option<String>,

    /// Event status column, 1 = event and 0 = censored; survival forests only.
    #[arg(long)]
    statusvarname: Option<String>,

    /// Forest type: 1 = classification, 3 = regression, 5 = survival,
    /// 9 = probability estimation.
    #[arg(long, default_value_t = 1)]
    treetype: u8,

    /// Number of trees to grow.
    #[arg(long)]
    ntree: Option<usize>,

    /// Candidate features per split; default floor(sqrt(p)).
    #[arg(long)]
    mtry: Option<usize>,

    /// Nodes at or below this size become terminal; defaults 1
    /// (classification), 5 (regression), 3 (survival), 10 (probability).
    #[arg(long)]
    targetpartitionsize: Option<usize>,

    /// Variable importance: 0 = none, 1 = impurity, 2 = permutation raw,
    /// 3 = permutation scaled.
    #[arg(long, default_value_t = 0)]
    impmeasure: u8,

    /// Memory mode: 0 = runtime optimized, 1 = memory efficient,
    /// 2 = packed genotypes.
    #[arg(long, default_value_t = 0)]
    memorymode: u8,

    /// Random seed; derived from the clock when omitted.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads; default all available cores.
    #[arg(long)]
    nthreads: Option<usize>,

    /// Save the grown forest to <outprefix>.forest.
    #[arg(long)]
    write: bool,

    /// Apply this stored forest to --file instead of training.
    #[arg(long, value_name = "FOREST")]
    predict: Option<PathBuf>,

    /// Prefix for all output files.
    #[arg(long, default_value = "grove_out")]
    outprefix: String,

    /// Print progress details.
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Measure forest growth time and memory along a parameter grid.
    Bench(harness::BenchArgs),
    /// Compare out-of-bag errors against the built-in reference forest.
    Validate(harness::ValidateArgs),
    /// Measure a single fully resolved benchmark point in this process.
    #[command(name = "bench-point", hide = true)]
    BenchPoint(harness::BenchPointArgs),
}

fn memory_mode_from_code(code: u8) -> Result<MemoryMode> {
    match code {
        0 => Ok(MemoryMode::RuntimeOptimized),
        1 => Ok(MemoryMode::MemoryEfficient),
        2 => Ok(MemoryMode::Gwas),
        _ => Err(GroveError::Config(format!(
            "unknown memory mode {code}; expected 0, 1 or 2"
        ))),
    }
}

fn exit_code(err: &GroveError) -> u8 {
    match err {
        GroveError::Config(_) => 1,
        GroveError::ForestFile(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let failed = err.use_stderr();
            let _ = err.print();
            return if failed { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Some(Command::Bench(args)) => harness::run_bench(args),
        Some(Command::Validate(args)) => harness::run_validate(args),
        Some(Command::BenchPoint(args)) => harness::run_bench_point(args),
        None => {
            if cli.main.predict.is_some() {
                predict::run(&cli.main)
            } else {
                train::run(&cli.main)
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("grove: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
