//! Out-of-bag agreement protocol between the engine and the reference
//! forest.
//!
//! A batch of logit-model datasets is simulated; on each one both
//! implementations grow a forest and report their out-of-bag error. The
//! per-dataset error pairs are summarized Bland-Altman style: mean
//! difference plus agreement limits at 1.96 standard deviations.

use grove_core::eval::oob_error;
use grove_core::forest::{grow_forest, GrowConfig};
use grove_core::{GroveError, Result};

use crate::naive::{naive_oob_error, NaiveConfig};
use crate::snp::{simulate_snp_dataset, Endpoint, SimOutcome, SimSpec};

/// Settings for one agreement run.
#[derive(Debug, Clone)]
pub struct ValidationConfig {
    /// Number of independently simulated datasets.
    pub datasets: usize,
    /// Base simulation; dataset `d` uses `spec.seed + d`.
    pub spec: SimSpec,
    pub num_trees: usize,
    pub worker_count: Option<usize>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            datasets: 20,
            spec: SimSpec {
                n: 500,
                p: 50,
                n_effect: 5,
                ..SimSpec::default()
            },
            num_trees: 500,
            worker_count: None,
        }
    }
}

/// Out-of-bag errors of both implementations on one dataset.
#[derive(Debug, Clone, Copy)]
pub struct ValidationPair {
    pub engine: f64,
    pub reference: f64,
}

impl ValidationPair {
    pub fn difference(&self) -> f64 {
        self.engine - self.reference
    }
}

/// Agreement summary over all datasets.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub pairs: Vec<ValidationPair>,
    pub mean_difference: f64,
    pub sd_difference: f64,
    pub lower_limit: f64,
    pub upper_limit: f64,
}

impl ValidationReport {
    /// Tab-separated pairs with a one-line header, one row per dataset.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("dataset\tengine_oob\treference_oob\tdifference\n");
        for (d, pair) in self.pairs.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6}\n",
                d + 1,
                pair.engine,
                pair.reference,
                pair.difference()
            ));
        }
        out
    }

    /// True when every per-dataset difference lies inside the agreement
    /// limits.
    pub fn all_within_limits(&self) -> bool {
        self.pairs
            .iter()
            .all(|p| p.difference() >= self.lower_limit && p.difference() <= self.upper_limit)
    }
}

/// Mean, sample standard deviation, and 1.96-sigma agreement limits of the
/// differences.
pub fn bland_altman_limits(differences: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if differences.len() < 2 {
        return Err(GroveError::Config(
            "agreement limits need at least two differences".into(),
        ));
    }
    let n = differences.len() as f64;
    let mean = differences.iter().sum::<f64>() / n;
    let ss: f64 = differences.iter().map(|d| (d - mean) * (d - mean)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    Ok((mean, sd, mean - 1.96 * sd, mean + 1.96 * sd))
}

/// Runs the full protocol: simulate, grow both forests per dataset, and
/// summarize agreement of the out-of-bag errors.
pub fn run_validation_protocol(cfg: &ValidationConfig) -> Result<ValidationReport> {
    if cfg.datasets < 2 {
        return Err(GroveError::Config(
            "agreement protocol needs at least two datasets".into(),
        ));
    }
    if cfg.spec.endpoint != Endpoint::Dichotomous {
        return Err(GroveError::Config(
            "the reference forest only supports dichotomous outcomes".into(),
        ));
    }
    let mtry = (cfg.spec.p as f64).sqrt().floor().max(1.0) as usize;

    let mut pairs = Vec::with_capacity(cfg.datasets);
    for d in 0..cfg.datasets {
        let spec = SimSpec {
            seed: cfg.spec.seed + d as u64,
            ..cfg.spec.clone()
        };
        let data = simulate_snp_dataset(&spec)?;
        let dataset = data.to_dataset(false)?;
        let grow = GrowConfig {
            num_trees: cfg.num_trees,
            mtry: Some(mtry),
            min_node_size: Some(1),
            seed: spec.seed,
            worker_count: cfg.worker_count,
            ..GrowConfig::default()
        };
        let forest = grow_forest(&dataset, &grow)?;
        let engine = oob_error(&forest, &dataset)?.error;

        let labels = match &data.outcome {
            SimOutcome::Labels(raw) => {
                let mut classes: Vec<&String> = raw.iter().collect();
                classes.sort();
                classes.dedup();
                raw.iter()
                    .map(|l| classes.binary_search(&l).unwrap() as u32)
                    .collect::<Vec<u32>>()
            }
            SimOutcome::Values(_) => unreachable!("endpoint checked above"),
        };
        let n_classes = labels.iter().max().map_or(0, |&m| m as usize + 1).max(2);
        let columns: Vec<Vec<f64>> = data
            .genotypes
            .iter()
            .map(|codes| codes.iter().map(|&c| f64::from(c)).collect())
            .collect();
        let naive = NaiveConfig {
            num_trees: cfg.num_trees,
            mtry,
            min_node_size: 1,
            seed: spec.seed.wrapping_add(0x0D1F_F00D),
        };
        let reference = naive_oob_error(&columns, &labels, n_classes, &naive)?;
        pairs.push(ValidationPair { engine, reference });
    }

    let differences: Vec<f64> = pairs.iter().map(ValidationPair::difference).collect();
    let (mean_difference, sd_difference, lower_limit, upper_limit) =
        bland_altman_limits(&differences)?;
    Ok(ValidationReport {
        pairs,
        mean_difference,
        sd_difference,
        lower_limit,
        upper_limit,
    })
}
