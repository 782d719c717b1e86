//! Fast random forests for classification, regression, survival and
//! probability estimation, built for wide data.
//!
//! The engine grows trees on bootstrap samples with per-node feature
//! subsampling, choosing among three split-search algorithms per node and
//! column: a presorted-index walk for large nodes, sort-on-demand for
//! small ones, and direct level counting for 2-bit packed genotype
//! columns. All three share their accumulation arithmetic, so the grown
//! forest is identical whichever gets picked, and fixed seeds reproduce
//! forests exactly regardless of thread count.
//!
//! ```
//! use grove_core::data::{Dataset, FeatureColumn, Response};
//! use grove_core::forest::{grow_forest, GrowConfig};
//! use grove_core::eval::oob_error;
//!
//! let labels: Vec<String> = (0..30)
//!     .map(|i| if i % 2 == 0 { "low".into() } else { "high".into() })
//!     .collect();
//! let x: Vec<f64> = (0..30)
//!     .map(|i| (i % 2) as f64 * 10.0 + 0.1 * (i as f64))
//!     .collect();
//! let dataset = Dataset::new(
//!     vec![FeatureColumn::dense("x", x)],
//!     Response::from_labels(&labels).unwrap(),
//! ).unwrap();
//!
//! let config = GrowConfig { num_trees: 20, ..GrowConfig::default() };
//! let forest = grow_forest(&dataset, &config).unwrap();
//! let summary = oob_error(&forest, &dataset).unwrap();
//! assert!(summary.error < 0.5);
//! ```

pub mod data;
pub mod error;
pub mod eval;
pub mod forest;
pub mod io;
pub mod sampling;
pub mod split;

pub use error::{GroveError, Result};
