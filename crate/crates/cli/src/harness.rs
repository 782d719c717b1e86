//! `bench` and `validate` subcommands.
//!
//! Benchmarks default to one child process per measurement so each point
//! gets a fresh peak-memory high-water mark; the hidden `bench-point`
//! subcommand is that child. `--inprocess` skips the isolation for quick
//! sweeps where only timing matters.

use std::path::{Path, PathBuf};

use clap::Args;
use grove_core::forest::TreeType;
use grove_core::{GroveError, Result};
use grove_sim::bench::{
    measure_point_inline, run_scaling_benchmark, BenchAxis, BenchBase, PointMeasure, PointRun,
};
use grove_sim::snp::SimSpec;
use grove_sim::validate::{run_validation_protocol, ValidationConfig};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Parameter to vary: trees, features, samples, or mtry (as a percent
    /// of the feature count).
    #[arg(long)]
    pub axis: String,

    /// Ascending grid values, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<u64>,

    /// Independently seeded measurements per grid value.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,

    /// Fixed sample count while another axis varies.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,

    /// Fixed feature count while another axis varies.
    #[arg(long, default_value_t = 1000)]
    pub features: usize,

    /// Fixed tree count while another axis varies.
    #[arg(long, default_value_t = 500)]
    pub ntree: usize,

    /// 1 = classification (grown to purity), 3 = regression (node size 25).
    #[arg(long, default_value_t = 1)]
    pub treetype: u8,

    /// Memory mode: 0 = runtime optimized, 1 = memory efficient,
    /// 2 = packed genotypes.
    #[arg(long, default_value_t = 0)]
    pub memorymode: u8,

    /// Worker threads for the engine under test.
    #[arg(long)]
    pub nthreads: Option<usize>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Measure in this process instead of one child process per point.
    #[arg(long)]
    pub inprocess: bool,

    /// Tab-separated report file.
    #[arg(long, default_value = "grove_bench.tsv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchPointArgs {
    #[arg(long)]
    pub samples: usize,

    #[arg(long)]
    pub features: usize,

    #[arg(long)]
    pub ntree: usize,

    #[arg(long)]
    pub mtry: usize,

    #[arg(long)]
    pub minnode: usize,

    #[arg(long, default_value_t = 1)]
    pub treetype: u8,

    #[arg(long, default_value_t = 0)]
    pub memorymode: u8,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub nthreads: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Number of independently simulated datasets.
    #[arg(long, default_value_t = 20)]
    pub datasets: usize,

    #[arg(long, default_value_t = 500)]
    pub samples: usize,

    #[arg(long, default_value_t = 50)]
    pub features: usize,

    /// Leading features given a real effect.
    #[arg(long, default_value_t = 5)]
    pub neffect: usize,

    /// Trees per forest, for the engine and the reference alike.
    #[arg(long, default_value_t = 500)]
    pub ntree: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for the engine side.
    #[arg(long)]
    pub nthreads: Option<usize>,

    /// Tab-separated report file, one row per dataset.
    #[arg(long, default_value = "grove_validation.tsv")]
    pub out: PathBuf,
}

fn bench_tree_type(code: u8) -> Result<TreeType> {
    let tree_type = TreeType::from_code(code)?;
    if tree_type != TreeType::Classification && tree_type != TreeType::Regression {
        return Err(GroveError::Config(
            "benchmarks cover tree types 1 (classification) and 3 (regression)".into(),
        ));
    }
    Ok(tree_type)
}

fn measure_point_child(exe: &Path, run: &PointRun) -> Result<PointMeasure> {
    let mut command = std::process::Command::new(exe);
    command
        .arg("bench-point")
        .args(["--samples", &run.n.to_string()])
        .args(["--features", &run.p.to_string()])
        .args(["--ntree", &run.num_trees.to_string()])
        .args(["--mtry", &run.mtry.to_string()])
        .args(["--minnode", &run.min_node_size.to_string()])
        .args(["--treetype", &run.tree_type.code().to_string()])
        .args(["--memorymode", &memory_mode_code(run).to_string()])
        .args(["--seed", &run.seed.to_string()]);
    if let Some(threads) = run.worker_count {
        command.args(["--nthreads", &threads.to_string()]);
    }
    let output = command.output()?;
    if !output.status.success() {
        return Err(GroveError::Data(format!(
            "benchmark child exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    parse_point_line(stdout.trim())
}

fn memory_mode_code(run: &PointRun) -> u8 {
    match run.memory_mode {
        grove_core::data::MemoryMode::RuntimeOptimized => 0,
        grove_core::data::MemoryMode::MemoryEfficient => 1,
        grove_core::data::MemoryMode::Gwas => 2,
    }
}

fn parse_point_line(line: &str) -> Result<PointMeasure> {
    let mut fields = line.split('\t');
    let seconds = fields
        .next()
        .and_then(|s| s.parse::<f64>().ok())
        .ok_or_else(|| GroveError::Data(format!("malformed benchmark child output {line:?}")))?;
    let peak_bytes = match fields.next() {
        Some("NA") | None => None,
        Some(bytes) => Some(bytes.parse::<u64>().map_err(|_| {
            GroveError::Data(format!("malformed benchmark child output {line:?}"))
        })?),
    };
    Ok(PointMeasure {
        seconds,
        peak_bytes,
    })
}

pub fn run_bench(args: &BenchArgs) -> Result<()> {
    let axis: BenchAxis = args.axis.parse().map_err(GroveError::Config)?;
    let base = BenchBase {
        n: args.samples,
        p: args.features,
        num_trees: args.ntree,
        tree_type: bench_tree_type(args.treetype)?,
        memory_mode: crate::memory_mode_from_code(args.memorymode)?,
        worker_count: args.nthreads,
        seed: args.seed,
    };
    let report = if args.inprocess {
        run_scaling_benchmark(&base, axis, &args.grid, args.repeats, |run| {
            measure_point_inline(run).map(|(measure, _)| measure)
        })?
    } else {
        let exe = std::env::current_exe()?;
        run_scaling_benchmark(&base, axis, &args.grid, args.repeats, |run| {
            measure_point_child(&exe, run)
        })?
    };
    for point in &report.points {
        if let Some(error) = &point.error {
            eprintln!("grove: grid value {} failed: {error}", point.value);
        }
    }
    std::fs::write(&args.out, report.to_tsv())?;
    println!("Benchmark report written to {}", args.out.display());
    Ok(())
}

pub fn run_bench_point(args: &BenchPointArgs) -> Result<()> {
    let run = PointRun {
        n: args.samples,
        p: args.features,
        num_trees: args.ntree,
        mtry: args.mtry,
        min_node_size: args.minnode,
        tree_type: bench_tree_type(args.treetype)?,
        memory_mode: crate::memory_mode_from_code(args.memorymode)?,
        worker_count: args.nthreads,
        seed: args.seed,
    };
    let (measure, _forest) = measure_point_inline(&run)?;
    match measure.peak_bytes {
        Some(bytes) => println!("{:.9}\t{bytes}", measure.seconds),
        None => println!("{:.9}\tNA", measure.seconds),
    }
    Ok(())
}

pub fn run_validate(args: &ValidateArgs) -> Result<()> {
    let cfg = ValidationConfig {
        datasets: args.datasets,
        spec: SimSpec {
            n: args.samples,
            p: args.features,
            n_effect: args.neffect,
            seed: args.seed,
            ..SimSpec::default()
        },
        num_trees: args.ntree,
        worker_count: args.nthreads,
    };
    let report = run_validation_protocol(&cfg)?;
    std::fs::write(&args.out, report.to_tsv())?;
    println!("{:<20}{}", "Datasets:", report.pairs.len());
    println!("{:<20}{:+.6}", "Mean difference:", report.mean_difference);
    println!(
        "{:<20}[{:+.6}, {:+.6}]",
        "Agreement limits:", report.lower_limit, report.upper_limit
    );
    println!("Report written to {}", args.out.display());
    Ok(())
}
