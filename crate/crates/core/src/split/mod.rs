//! Node splitting: criteria, the three search algorithms, and strategy
//! selection.
//!
//! A split sends `value <= threshold` to the left child. Thresholds are
//! midpoints of adjacent distinct values present in the node, candidates
//! need a strictly positive gain, and ties keep the first candidate in
//! (feature draw order, ascending threshold) order. Those conventions are
//! shared by all search algorithms, which therefore return identical
//! splits for the same node and feature.

mod criteria;
#[cfg(any(test, feature = "test-oracles"))]
pub mod oracle;
mod search;

pub use criteria::{
    gini_decrease, gini_impurity, logrank_statistic, variance_decrease, Criterion,
};
pub(crate) use criteria::{NodeKernel, ResponseView, SurvTable};
pub(crate) use search::{
    search_fixed_levels, search_presorted, search_sort_on_demand, ScanOutcome,
};

use crate::data::{ColumnView, Dataset, MemoryMode, StorageKind};
use crate::error::{GroveError, Result};

/// Which search algorithm a node/feature pair should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitStrategy {
    /// Walk a dataset-wide value-sorted row permutation, skipping rows
    /// outside the node. Fast for large nodes; needs the cached index.
    Presorted,
    /// Gather the node's values and sort them on the spot.
    SortOnDemand,
    /// Count directly into the three genotype levels without sorting.
    FixedLevels,
}

/// Best split found for one node, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitResult {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Pick the search algorithm for a node of `node_size` samples on a column
/// with the given storage, under the given memory mode. Packed columns
/// always use fixed-level counting. Dense columns use the presorted walk
/// only in the runtime-optimized mode and only when the node is larger
/// than `large_node_threshold`; otherwise sorting the node on demand is
/// cheaper than walking the whole dataset.
pub fn select_split_strategy(
    node_size: usize,
    memory_mode: MemoryMode,
    storage: StorageKind,
    large_node_threshold: usize,
) -> SplitStrategy {
    match storage {
        StorageKind::PackedGenotype => SplitStrategy::FixedLevels,
        StorageKind::Dense => match memory_mode {
            MemoryMode::RuntimeOptimized if node_size > large_node_threshold => {
                SplitStrategy::Presorted
            }
            _ => SplitStrategy::SortOnDemand,
        },
    }
}

fn checked_kernel<'a>(
    dataset: &'a Dataset,
    node: &[u32],
    feature: usize,
    criterion: Criterion,
) -> Result<(NodeKernel<'a>, ColumnView<'a>)> {
    if feature >= dataset.n_features() {
        return Err(GroveError::Config(format!(
            "feature index {feature} out of range for {} features",
            dataset.n_features()
        )));
    }
    if node.is_empty() {
        return Err(GroveError::Data("cannot split an empty node".into()));
    }
    if let Some(&max) = node.iter().max() {
        if max as usize >= dataset.n_samples() {
            return Err(GroveError::Data(format!(
                "node references row {max} beyond {} samples",
                dataset.n_samples()
            )));
        }
    }
    let resp = ResponseView::for_criterion(criterion, dataset.response())?;
    Ok((
        NodeKernel::new(resp, node),
        dataset.feature(feature).view(),
    ))
}

fn outcome_to_result(feature: usize, outcome: Option<ScanOutcome>) -> Option<SplitResult> {
    outcome.map(|o| SplitResult {
        feature,
        threshold: o.threshold,
        gain: o.gain,
    })
}

/// Best split of `node` on `feature`, sorting the node's values on demand.
/// `node` lists row indices ascending, one entry per bootstrap occurrence.
pub fn best_split_sort_on_demand(
    dataset: &Dataset,
    node: &[u32],
    feature: usize,
    criterion: Criterion,
) -> Result<Option<SplitResult>> {
    let (mut kernel, column) = checked_kernel(dataset, node, feature, criterion)?;
    let mut scratch = Vec::with_capacity(node.len());
    Ok(outcome_to_result(
        feature,
        search_sort_on_demand(&column, node, &mut kernel, &mut scratch),
    ))
}

/// Best split of `node` on `feature` using the dataset-wide sorted value
/// index, which must have been built with
/// [`Dataset::build_sorted_index`].
pub fn best_split_presorted(
    dataset: &Dataset,
    node: &[u32],
    feature: usize,
    criterion: Criterion,
) -> Result<Option<SplitResult>> {
    let (mut kernel, column) = checked_kernel(dataset, node, feature, criterion)?;
    let index = dataset.sorted_index().ok_or_else(|| {
        GroveError::Config(
            "presorted search needs the sorted value index; call build_sorted_index first".into(),
        )
    })?;
    let sorted_rows = &index[feature];
    if sorted_rows.is_empty() {
        return Err(GroveError::Config(
            "presorted search is not available for packed columns".into(),
        ));
    }
    let mut node_counts = vec![0u32; dataset.n_samples()];
    for &sid in node {
        node_counts[sid as usize] += 1;
    }
    Ok(outcome_to_result(
        feature,
        search_presorted(&column, sorted_rows, &node_counts, node.len(), &mut kernel),
    ))
}

/// Best split of `node` on `feature` by fixed-level counting; the column
/// must hold genotype codes {0, 1, 2}, packed or dense.
pub fn best_split_fixed_levels(
    dataset: &Dataset,
    node: &[u32],
    feature: usize,
    criterion: Criterion,
) -> Result<Option<SplitResult>> {
    let (mut kernel, column) = checked_kernel(dataset, node, feature, criterion)?;
    Ok(outcome_to_result(
        feature,
        search_fixed_levels(&column, node, &mut kernel)?,
    ))
}
