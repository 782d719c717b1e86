//! Simulation and measurement companions to the forest engine: an SNP
//! genotype data generator with logit and linear outcome models, a plain
//! reference random forest for cross-checking out-of-bag errors, an
//! agreement protocol summarizing the comparison, and a benchmark harness
//! for runtime and peak-memory scaling studies.

pub mod bench;
pub mod memory;
pub mod naive;
pub mod snp;
pub mod validate;
