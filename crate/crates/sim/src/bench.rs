//! Runtime and memory scaling harness.
//!
//! A sweep varies one parameter along a grid while the others stay fixed,
//! grows a forest on freshly simulated data for every grid value and repeat,
//! and records wall-clock growth time plus baseline-subtracted peak memory.
//! Each measurement is delegated to a caller-supplied runner so the command
//! line tool can isolate points in child processes for clean peak-memory
//! accounting; [`measure_point_inline`] is the in-process reference runner.

use std::time::Instant;

use grove_core::data::MemoryMode;
use grove_core::forest::{grow_forest, ForestModel, GrowConfig, TreeType};
use grove_core::{GroveError, Result};

use crate::memory::{current_rss_bytes, peak_rss_bytes};
use crate::snp::{simulate_snp_dataset, Endpoint, SimSpec};

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchAxis {
    NumTrees,
    Features,
    Samples,
    MtryPercent,
}

impl BenchAxis {
    pub fn label(&self) -> &'static str {
        match self {
            BenchAxis::NumTrees => "num_trees",
            BenchAxis::Features => "features",
            BenchAxis::Samples => "samples",
            BenchAxis::MtryPercent => "mtry_percent",
        }
    }
}

impl std::str::FromStr for BenchAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "trees" => Ok(BenchAxis::NumTrees),
            "features" => Ok(BenchAxis::Features),
            "samples" => Ok(BenchAxis::Samples),
            "mtry" => Ok(BenchAxis::MtryPercent),
            other => Err(format!(
                "unknown axis {other:?}; expected trees, features, samples, or mtry"
            )),
        }
    }
}

/// Fixed parameters of a sweep; the axis overrides one of them per point.
#[derive(Debug, Clone)]
pub struct BenchBase {
    pub n: usize,
    pub p: usize,
    pub num_trees: usize,
    pub tree_type: TreeType,
    pub memory_mode: MemoryMode,
    pub worker_count: Option<usize>,
    pub seed: u64,
}

impl Default for BenchBase {
    fn default() -> Self {
        BenchBase {
            n: 1000,
            p: 1000,
            num_trees: 500,
            tree_type: TreeType::Classification,
            memory_mode: MemoryMode::RuntimeOptimized,
            worker_count: None,
            seed: 0,
        }
    }
}

/// Fully resolved parameters of one measured forest growth.
#[derive(Debug, Clone)]
pub struct PointRun {
    pub n: usize,
    pub p: usize,
    pub num_trees: usize,
    pub mtry: usize,
    pub min_node_size: usize,
    pub tree_type: TreeType,
    pub memory_mode: MemoryMode,
    pub worker_count: Option<usize>,
    pub seed: u64,
}

/// One measurement: growth wall time and the memory attributable to the
/// run (peak minus pre-run baseline), when the platform can report it.
#[derive(Debug, Clone, Copy)]
pub struct PointMeasure {
    pub seconds: f64,
    pub peak_bytes: Option<u64>,
}

/// Aggregated results for one grid value.
#[derive(Debug, Clone)]
pub struct BenchPoint {
    pub value: u64,
    pub mean_seconds: Option<f64>,
    pub mean_peak_bytes: Option<f64>,
    pub error: Option<String>,
}

/// Sweep results in grid order.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub axis: BenchAxis,
    pub repeats: usize,
    pub points: Vec<BenchPoint>,
}

impl BenchReport {
    /// Tab-separated rows with a one-line header; unavailable measurements
    /// are written as `NA`.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{}\tmean_seconds\tmean_peak_bytes\n", self.axis.label());
        for point in &self.points {
            let seconds = point
                .mean_seconds
                .map_or_else(|| "NA".to_string(), |s| format!("{s:.6}"));
            let bytes = point
                .mean_peak_bytes
                .map_or_else(|| "NA".to_string(), |b| format!("{b:.0}"));
            out.push_str(&format!("{}\t{}\t{}\n", point.value, seconds, bytes));
        }
        out
    }
}

/// Resolves the grid value into a concrete run. Classification forests grow
/// to purity, regression forests stop at 25 samples per node, and mtry
/// defaults to the square root of the feature count unless the axis sets it
/// as a percentage.
pub fn plan_point(base: &BenchBase, axis: BenchAxis, value: u64, seed: u64) -> PointRun {
    let mut n = base.n;
    let mut p = base.p;
    let mut num_trees = base.num_trees;
    match axis {
        BenchAxis::NumTrees => num_trees = value as usize,
        BenchAxis::Features => p = value as usize,
        BenchAxis::Samples => n = value as usize,
        BenchAxis::MtryPercent => {}
    }
    let mtry = match axis {
        BenchAxis::MtryPercent => (p * value as usize / 100).max(1),
        _ => (p as f64).sqrt().floor().max(1.0) as usize,
    };
    let min_node_size = match base.tree_type {
        TreeType::Regression => 25,
        _ => 1,
    };
    PointRun {
        n,
        p,
        num_trees,
        mtry,
        min_node_size,
        tree_type: base.tree_type,
        memory_mode: base.memory_mode,
        worker_count: base.worker_count,
        seed,
    }
}

/// Simulation settings behind a run: a handful of effect features so the
/// grown trees do real work, endpoint matched to the tree type.
pub fn point_sim_spec(run: &PointRun) -> SimSpec {
    SimSpec {
        n: run.n,
        p: run.p,
        n_effect: run.p.min(5),
        endpoint: match run.tree_type {
            TreeType::Regression => Endpoint::Continuous,
            _ => Endpoint::Dichotomous,
        },
        seed: run.seed,
        ..SimSpec::default()
    }
}

/// Engine settings behind a run.
pub fn point_grow_config(run: &PointRun) -> GrowConfig {
    GrowConfig {
        tree_type: run.tree_type,
        num_trees: run.num_trees,
        mtry: Some(run.mtry),
        min_node_size: Some(run.min_node_size),
        memory_mode: run.memory_mode,
        worker_count: run.worker_count,
        seed: run.seed,
        ..GrowConfig::default()
    }
}

/// Simulates the run's dataset and grows its forest in this process,
/// timing growth only. The memory baseline is read before the dataset is
/// materialized so the reported bytes cover the data representation plus
/// growth. Returns the forest so callers can verify the harness left the
/// engine's output untouched.
pub fn measure_point_inline(run: &PointRun) -> Result<(PointMeasure, ForestModel)> {
    if run.tree_type != TreeType::Classification && run.tree_type != TreeType::Regression {
        return Err(GroveError::Config(
            "benchmarks cover classification and regression forests".into(),
        ));
    }
    let baseline = current_rss_bytes();
    let data = simulate_snp_dataset(&point_sim_spec(run))?;
    let dataset = data.to_dataset(run.memory_mode == MemoryMode::Gwas)?;
    drop(data);
    let started = Instant::now();
    let forest = grow_forest(&dataset, &point_grow_config(run))?;
    let seconds = started.elapsed().as_secs_f64();
    let peak_bytes = match (peak_rss_bytes(), baseline) {
        (Some(peak), Some(base)) => Some(peak.saturating_sub(base)),
        _ => None,
    };
    Ok((PointMeasure { seconds, peak_bytes }, forest))
}

/// Runs the sweep, aggregating `repeats` independently seeded measurements
/// per grid value. A failing point is recorded with its error message and
/// the sweep continues.
pub fn run_scaling_benchmark<F>(
    base: &BenchBase,
    axis: BenchAxis,
    grid: &[u64],
    repeats: usize,
    mut runner: F,
) -> Result<BenchReport>
where
    F: FnMut(&PointRun) -> Result<PointMeasure>,
{
    if grid.is_empty() {
        return Err(GroveError::Config("benchmark grid is empty".into()));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(GroveError::Config(
            "benchmark grid must be strictly ascending".into(),
        ));
    }
    if repeats == 0 {
        return Err(GroveError::Config("at least one repeat required".into()));
    }

    let mut points = Vec::with_capacity(grid.len());
    for (idx, &value) in grid.iter().enumerate() {
        let mut measures = Vec::with_capacity(repeats);
        let mut failure = None;
        for rep in 0..repeats {
            let seed = base.seed + (idx * repeats + rep) as u64 + 1;
            let run = plan_point(base, axis, value, seed);
            match runner(&run) {
                Ok(measure) => measures.push(measure),
                Err(err) => {
                    failure = Some(err.to_string());
                    break;
                }
            }
        }
        points.push(match failure {
            Some(error) => BenchPoint {
                value,
                mean_seconds: None,
                mean_peak_bytes: None,
                error: Some(error),
            },
            None => {
                let mean_seconds =
                    measures.iter().map(|m| m.seconds).sum::<f64>() / measures.len() as f64;
                let mean_peak_bytes = measures
                    .iter()
                    .map(|m| m.peak_bytes)
                    .collect::<Option<Vec<u64>>>()
                    .map(|bytes| bytes.iter().sum::<u64>() as f64 / bytes.len() as f64);
                BenchPoint {
                    value,
                    mean_seconds: Some(mean_seconds),
                    mean_peak_bytes,
                    error: None,
                }
            }
        });
    }
    Ok(BenchReport {
        axis,
        repeats,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use grove_core::io::serialize_forest;

    fn desk_base() -> BenchBase {
        BenchBase {
            n: 150,
            p: 12,
            num_trees: 30,
            ..BenchBase::default()
        }
    }

    #[test]
    fn plan_point_overrides_one_axis() {
        let base = BenchBase::default();
        assert_eq!(plan_point(&base, BenchAxis::NumTrees, 250, 1).num_trees, 250);
        assert_eq!(plan_point(&base, BenchAxis::Features, 64, 1).p, 64);
        assert_eq!(plan_point(&base, BenchAxis::Samples, 512, 1).n, 512);
        let mtry = plan_point(&base, BenchAxis::MtryPercent, 20, 1).mtry;
        assert_eq!(mtry, 200);
    }

    #[test]
    fn plan_point_defaults_mtry_to_root_p() {
        let run = plan_point(&BenchBase::default(), BenchAxis::Features, 64, 1);
        assert_eq!(run.mtry, 8);
    }

    #[test]
    fn regression_points_stop_at_node_size_25() {
        let base = BenchBase {
            tree_type: TreeType::Regression,
            ..BenchBase::default()
        };
        let run = plan_point(&base, BenchAxis::NumTrees, 100, 1);
        assert_eq!(run.min_node_size, 25);
        assert_eq!(point_sim_spec(&run).endpoint, Endpoint::Continuous);
    }

    #[test]
    fn sweep_aggregates_repeats_with_distinct_seeds() {
        let mut seeds = Vec::new();
        let report = run_scaling_benchmark(
            &desk_base(),
            BenchAxis::NumTrees,
            &[10, 20],
            3,
            |run| {
                seeds.push(run.seed);
                Ok(PointMeasure {
                    seconds: run.num_trees as f64,
                    peak_bytes: Some(1000),
                })
            },
        )
        .unwrap();
        assert_eq!(seeds.len(), 6);
        let mut unique = seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), 6);
        assert_eq!(report.points[0].mean_seconds, Some(10.0));
        assert_eq!(report.points[1].mean_seconds, Some(20.0));
        assert_eq!(report.points[0].mean_peak_bytes, Some(1000.0));
    }

    #[test]
    fn failing_point_does_not_abort_the_sweep() {
        let report = run_scaling_benchmark(
            &desk_base(),
            BenchAxis::NumTrees,
            &[10, 20, 30],
            1,
            |run| {
                if run.num_trees == 20 {
                    Err(GroveError::Config("out of budget".into()))
                } else {
                    Ok(PointMeasure {
                        seconds: 1.0,
                        peak_bytes: None,
                    })
                }
            },
        )
        .unwrap();
        assert!(report.points[0].error.is_none());
        assert!(report.points[1].error.is_some());
        assert_eq!(report.points[1].mean_seconds, None);
        assert!(report.points[2].error.is_none());
    }

    #[test]
    fn unsorted_grid_is_rejected() {
        let err = run_scaling_benchmark(&desk_base(), BenchAxis::NumTrees, &[20, 10], 1, |_| {
            Ok(PointMeasure {
                seconds: 1.0,
                peak_bytes: None,
            })
        });
        assert!(err.is_err());
    }

    #[test]
    fn tsv_report_writes_na_for_missing_values() {
        let report = BenchReport {
            axis: BenchAxis::Samples,
            repeats: 1,
            points: vec![
                BenchPoint {
                    value: 100,
                    mean_seconds: Some(0.5),
                    mean_peak_bytes: None,
                    error: None,
                },
                BenchPoint {
                    value: 200,
                    mean_seconds: None,
                    mean_peak_bytes: None,
                    error: Some("boom".into()),
                },
            ],
        };
        let tsv = report.to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], "samples\tmean_seconds\tmean_peak_bytes");
        assert_eq!(lines[1], "100\t0.500000\tNA");
        assert_eq!(lines[2], "200\tNA\tNA");
    }

    #[test]
    fn harness_growth_matches_direct_growth() {
        let run = plan_point(&desk_base(), BenchAxis::NumTrees, 20, 9);
        let (_, harness_forest) = measure_point_inline(&run).unwrap();
        let data = simulate_snp_dataset(&point_sim_spec(&run)).unwrap();
        let dataset = data.to_dataset(false).unwrap();
        let direct = grow_forest(&dataset, &point_grow_config(&run)).unwrap();
        assert_eq!(serialize_forest(&harness_forest), serialize_forest(&direct));
    }

    #[test]
    fn more_trees_take_longer() {
        let base = desk_base();
        let report =
            run_scaling_benchmark(&base, BenchAxis::NumTrees, &[20, 160], 1, |run| {
                measure_point_inline(run).map(|(m, _)| m)
            })
            .unwrap();
        let fast = report.points[0].mean_seconds.unwrap();
        let slow = report.points[1].mean_seconds.unwrap();
        assert!(slow > fast, "20 trees {fast}s vs 160 trees {slow}s");
    }
}
