//! Reading training/prediction tables and persisting forests.

pub mod dataset;
pub mod forest_file;

pub use dataset::{build_dataset, parse_dataset_file, parse_dataset_str, ParsedColumn, ParsedTable, ResponseSpec};
pub use forest_file::{deserialize_forest, read_forest_file, serialize_forest, write_forest_file};
