//! Simulated SNP genotype data with a logit or linear outcome model.
//!
//! Each feature is a minor allele count in {0, 1, 2} drawn as
//! Binomial(2, maf) with the allele frequency itself drawn uniformly from a
//! configured range. The first `n_effect` features carry a signal through a
//! linear predictor over centered genotypes; the remaining features are
//! noise. A dichotomous endpoint passes the predictor through a logistic
//! link, a continuous endpoint adds standard normal noise.

use grove_core::data::{Dataset, FeatureColumn, PackedColumn, Response};
use grove_core::sampling::RngStream;
use grove_core::{GroveError, Result};

/// Outcome family of a simulated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Dichotomous,
    Continuous,
}

/// Parameters of one simulated dataset.
#[derive(Debug, Clone)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    /// Number of leading features given a real effect.
    pub n_effect: usize,
    /// Coefficient applied to each centered effect genotype.
    pub effect_size: f64,
    /// Minor allele frequencies are drawn uniformly from this range.
    pub maf_range: (f64, f64),
    pub endpoint: Endpoint,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            n: 2000,
            p: 50,
            n_effect: 5,
            effect_size: 0.5,
            maf_range: (0.1, 0.45),
            endpoint: Endpoint::Dichotomous,
            seed: 0,
        }
    }
}

impl SimSpec {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(GroveError::Config(
                "simulation needs at least one sample and one feature".into(),
            ));
        }
        if self.n_effect > self.p {
            return Err(GroveError::Config(format!(
                "{} effect features exceed the {} available",
                self.n_effect, self.p
            )));
        }
        let (low, high) = self.maf_range;
        if !(low > 0.0 && low <= high && high <= 0.5) {
            return Err(GroveError::Config(
                "minor allele frequency range must satisfy 0 < low <= high <= 0.5".into(),
            ));
        }
        Ok(())
    }
}

/// Simulated outcome vector.
#[derive(Debug, Clone, PartialEq)]
pub enum SimOutcome {
    Labels(Vec<String>),
    Values(Vec<f64>),
}

/// Raw simulated data: allele frequencies, column-major genotype codes,
/// and the outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SnpData {
    pub mafs: Vec<f64>,
    /// `p` columns of `n` minor allele counts each.
    pub genotypes: Vec<Vec<u8>>,
    pub outcome: SimOutcome,
}

impl SnpData {
    pub fn n_samples(&self) -> usize {
        self.genotypes.first().map_or(0, Vec::len)
    }

    pub fn n_features(&self) -> usize {
        self.genotypes.len()
    }

    /// Builds the engine dataset. With `packed` the genotype columns are
    /// stored two bits per value; one dense column is materialized at a
    /// time so the full floating-point matrix never exists in memory.
    pub fn to_dataset(&self, packed: bool) -> Result<Dataset> {
        let columns = self
            .genotypes
            .iter()
            .enumerate()
            .map(|(j, codes)| {
                let name = format!("snp{}", j + 1);
                let dense: Vec<f64> = codes.iter().map(|&c| f64::from(c)).collect();
                if packed {
                    Ok(FeatureColumn::packed(name, PackedColumn::from_dense(&dense)?))
                } else {
                    Ok(FeatureColumn::dense(name, dense))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let response = match &self.outcome {
            SimOutcome::Labels(labels) => Response::from_labels(labels)?,
            SimOutcome::Values(values) => Response::Regression {
                values: values.clone(),
            },
        };
        Dataset::new(columns, response)
    }
}

fn standard_normal(rng: &mut RngStream) -> f64 {
    let u1 = 1.0 - rng.next_f64();
    let u2 = rng.next_f64();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Draws allele frequencies, genotypes, and outcomes for `spec`. The same
/// spec always produces identical data.
pub fn simulate_snp_dataset(spec: &SimSpec) -> Result<SnpData> {
    spec.validate()?;
    let mut rng = RngStream::new(spec.seed);
    let (low, high) = spec.maf_range;
    let mafs: Vec<f64> = (0..spec.p)
        .map(|_| low + rng.next_f64() * (high - low))
        .collect();
    let genotypes: Vec<Vec<u8>> = mafs
        .iter()
        .map(|&maf| {
            (0..spec.n)
                .map(|_| u8::from(rng.next_f64() < maf) + u8::from(rng.next_f64() < maf))
                .collect()
        })
        .collect();
    let predictor: Vec<f64> = (0..spec.n)
        .map(|i| {
            let sum: f64 = (0..spec.n_effect)
                .map(|j| f64::from(genotypes[j][i]) - 2.0 * mafs[j])
                .sum();
            spec.effect_size * sum
        })
        .collect();
    let outcome = match spec.endpoint {
        Endpoint::Dichotomous => SimOutcome::Labels(
            predictor
                .iter()
                .map(|&lp| {
                    let prob = 1.0 / (1.0 + (-lp).exp());
                    if rng.next_f64() < prob { "1" } else { "0" }.to_string()
                })
                .collect(),
        ),
        Endpoint::Continuous => SimOutcome::Values(
            predictor
                .iter()
                .map(|&lp| lp + standard_normal(&mut rng))
                .collect(),
        ),
    };
    Ok(SnpData {
        mafs,
        genotypes,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use grove_core::eval::oob_error;
    use grove_core::forest::{grow_forest, GrowConfig};

    fn small_spec() -> SimSpec {
        SimSpec {
            n: 200,
            p: 8,
            n_effect: 2,
            seed: 11,
            ..SimSpec::default()
        }
    }

    #[test]
    fn same_spec_reproduces_identical_data() {
        let a = simulate_snp_dataset(&small_spec()).unwrap();
        let b = simulate_snp_dataset(&small_spec()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = simulate_snp_dataset(&small_spec()).unwrap();
        let mut spec = small_spec();
        spec.seed = 12;
        let b = simulate_snp_dataset(&spec).unwrap();
        assert_ne!(a.genotypes, b.genotypes);
    }

    #[test]
    fn dimensions_match_spec() {
        let data = simulate_snp_dataset(&SimSpec::default()).unwrap();
        assert_eq!(data.n_features(), 50);
        assert_eq!(data.n_samples(), 2000);
        assert_eq!(data.mafs.len(), 50);
        assert!(data.mafs.iter().all(|&m| (0.1..=0.45).contains(&m)));
    }

    #[test]
    fn homozygous_minor_frequency_follows_squared_maf() {
        let spec = SimSpec {
            n: 100_000,
            p: 1,
            n_effect: 0,
            maf_range: (0.3, 0.3),
            seed: 5,
            ..SimSpec::default()
        };
        let data = simulate_snp_dataset(&spec).unwrap();
        let twos = data.genotypes[0].iter().filter(|&&g| g == 2).count();
        let freq = twos as f64 / 100_000.0;
        assert!((freq - 0.09).abs() < 0.005, "observed {freq}");
    }

    #[test]
    fn null_effect_forest_stays_near_chance() {
        let spec = SimSpec {
            n: 600,
            p: 10,
            n_effect: 0,
            effect_size: 0.0,
            seed: 21,
            ..SimSpec::default()
        };
        let data = simulate_snp_dataset(&spec).unwrap();
        let ds = data.to_dataset(false).unwrap();
        let cfg = GrowConfig {
            num_trees: 100,
            seed: 1,
            ..GrowConfig::default()
        };
        let forest = grow_forest(&ds, &cfg).unwrap();
        let err = oob_error(&forest, &ds).unwrap().error;
        assert!((err - 0.5).abs() < 0.05, "null-model OOB error {err}");
    }

    #[test]
    fn packed_and_dense_datasets_expose_identical_values() {
        let data = simulate_snp_dataset(&small_spec()).unwrap();
        let dense = data.to_dataset(false).unwrap();
        let packed = data.to_dataset(true).unwrap();
        for j in 0..data.n_features() {
            let dv = dense.feature(j).view();
            let pv = packed.feature(j).view();
            for i in 0..data.n_samples() {
                assert_eq!(dv.value(i), pv.value(i));
            }
        }
        assert_eq!(dense.feature_names(), packed.feature_names());
    }

    #[test]
    fn effect_count_beyond_features_is_rejected() {
        let spec = SimSpec {
            n: 10,
            p: 3,
            n_effect: 4,
            ..SimSpec::default()
        };
        assert!(simulate_snp_dataset(&spec).is_err());
    }

    #[test]
    fn invalid_maf_range_is_rejected() {
        for range in [(0.0, 0.3), (0.4, 0.2), (0.2, 0.6)] {
            let spec = SimSpec {
                maf_range: range,
                ..SimSpec::default()
            };
            assert!(simulate_snp_dataset(&spec).is_err(), "range {range:?}");
        }
    }

    #[test]
    fn continuous_endpoint_produces_values() {
        let spec = SimSpec {
            n: 50,
            p: 4,
            n_effect: 1,
            endpoint: Endpoint::Continuous,
            seed: 9,
            ..SimSpec::default()
        };
        let data = simulate_snp_dataset(&spec).unwrap();
        match &data.outcome {
            SimOutcome::Values(v) => {
                assert_eq!(v.len(), 50);
                assert!(v.iter().all(|x| x.is_finite()));
            }
            SimOutcome::Labels(_) => unreachable!(),
        }
        assert!(data.to_dataset(false).is_ok());
    }
}
