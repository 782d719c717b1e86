//! Forest growth and prediction.
//!
//! Trees grow depth-first on bootstrap samples (n draws with replacement),
//! drawing `mtry` fresh candidate features per node and stopping at nodes
//! that are pure, at or below the minimum size, or without any
//! positive-gain split. Growth is reproducible for a fixed seed regardless
//! of worker count: every tree derives its own random stream from the
//! master seed and its tree index, and trees are assembled in index order.

mod grow;
mod survival;
mod tree;

pub use survival::{forest_timepoints, terminal_survival_curve};
pub use tree::{LeafPayload, TreeModel};

use grow::TreeGrower;
use rayon::prelude::*;

use crate::data::{stable_argsort, ColumnView, Dataset, MemoryMode, Response};
use crate::error::{GroveError, Result};
use crate::sampling::{bootstrap, BagRecord, RngStream};
use crate::split::Criterion;

/// The four supported forest kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeType {
    Classification,
    Regression,
    Survival,
    Probability,
}

impl TreeType {
    /// Stable numeric code used by the CLI and the forest file format.
    pub fn code(self) -> u8 {
        match self {
            TreeType::Classification => 1,
            TreeType::Regression => 3,
            TreeType::Survival => 5,
            TreeType::Probability => 9,
        }
    }

    pub fn from_code(code: u8) -> Result<TreeType> {
        match code {
            1 => Ok(TreeType::Classification),
            3 => Ok(TreeType::Regression),
            5 => Ok(TreeType::Survival),
            9 => Ok(TreeType::Probability),
            _ => Err(GroveError::Config(format!(
                "unknown tree type code {code}; expected 1, 3, 5 or 9"
            ))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TreeType::Classification => "Classification",
            TreeType::Regression => "Regression",
            TreeType::Survival => "Survival",
            TreeType::Probability => "Probability estimation",
        }
    }
}

/// Which variable importance the forest should accumulate or compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImportanceMode {
    #[default]
    None,
    Gini,
    PermutationRaw,
    PermutationScaled,
}

/// Forest growth settings. `None` fields fall back to the documented
/// defaults at growth time.
#[derive(Debug, Clone)]
pub struct GrowConfig {
    pub tree_type: TreeType,
    pub num_trees: usize,
    /// Candidate features per node; default floor(sqrt(p)), minimum 1.
    pub mtry: Option<usize>,
    /// Nodes at or below this size become terminal; defaults per tree
    /// type: classification 1, regression 5, survival 3, probability 10.
    pub min_node_size: Option<usize>,
    pub memory_mode: MemoryMode,
    pub importance_mode: ImportanceMode,
    pub seed: u64,
    /// Worker threads for growth; `None` uses all available cores.
    pub worker_count: Option<usize>,
    /// Node size above which the presorted search is preferred in the
    /// runtime-optimized mode.
    pub large_node_threshold: usize,
}

impl Default for GrowConfig {
    fn default() -> Self {
        GrowConfig {
            tree_type: TreeType::Classification,
            num_trees: 500,
            mtry: None,
            min_node_size: None,
            memory_mode: MemoryMode::default(),
            importance_mode: ImportanceMode::None,
            seed: 0,
            worker_count: None,
            large_node_threshold: 100,
        }
    }
}

/// floor(sqrt(p)), at least 1.
pub fn default_mtry(n_features: usize) -> usize {
    ((n_features as f64).sqrt().floor() as usize).max(1)
}

/// Default terminal node size per tree type.
pub fn default_min_node_size(tree_type: TreeType) -> usize {
    match tree_type {
        TreeType::Classification => 1,
        TreeType::Regression => 5,
        TreeType::Survival => 3,
        TreeType::Probability => 10,
    }
}

/// Growth settings with defaults applied and validated against a dataset.
pub(crate) struct ResolvedGrow {
    pub tree_type: TreeType,
    pub criterion: Criterion,
    pub mtry: usize,
    pub min_node_size: usize,
    pub memory_mode: MemoryMode,
    pub accumulate_impurity: bool,
    pub large_node_threshold: usize,
    pub n_classes: usize,
    pub timepoints: Vec<f64>,
}

fn resolve(config: &GrowConfig, dataset: &Dataset) -> Result<ResolvedGrow> {
    let (n_classes, timepoints) = match (config.tree_type, dataset.response()) {
        (TreeType::Classification | TreeType::Probability, Response::Classification { classes, .. }) => {
            (classes.len(), Vec::new())
        }
        (TreeType::Regression, Response::Regression { .. }) => (0, Vec::new()),
        (TreeType::Survival, Response::Survival { times, statuses }) => {
            (0, forest_timepoints(times, statuses))
        }
        (tree_type, _) => {
            return Err(GroveError::Config(format!(
                "{} trees cannot be grown on this response type",
                tree_type.label()
            )));
        }
    };
    if config.num_trees == 0 {
        return Err(GroveError::Config("num_trees must be at least 1".into()));
    }
    if config.worker_count == Some(0) {
        return Err(GroveError::Config("worker_count must be at least 1".into()));
    }
    let p = dataset.n_features();
    let mtry = config.mtry.unwrap_or_else(|| default_mtry(p));
    if mtry == 0 || mtry > p {
        return Err(GroveError::Config(format!(
            "mtry {mtry} must be between 1 and the number of features ({p})"
        )));
    }
    let min_node_size = config
        .min_node_size
        .unwrap_or_else(|| default_min_node_size(config.tree_type));
    if min_node_size == 0 {
        return Err(GroveError::Config("min_node_size must be at least 1".into()));
    }
    let criterion = Criterion::for_response(dataset.response());
    Ok(ResolvedGrow {
        tree_type: config.tree_type,
        criterion,
        mtry,
        min_node_size,
        memory_mode: config.memory_mode,
        accumulate_impurity: config.importance_mode == ImportanceMode::Gini,
        large_node_threshold: config.large_node_threshold,
        n_classes,
        timepoints,
    })
}

/// A grown forest plus everything needed to evaluate and serialize it.
/// `bag_records` is empty for forests loaded from a file; out-of-bag
/// evaluation is only possible on freshly grown forests.
#[derive(Debug, Clone)]
pub struct ForestModel {
    pub tree_type: TreeType,
    pub memory_mode: MemoryMode,
    pub feature_names: Vec<String>,
    /// Class names (classification and probability forests).
    pub classes: Vec<String>,
    /// Evaluation grid for terminal curves (survival forests).
    pub timepoints: Vec<f64>,
    pub mtry: usize,
    pub min_node_size: usize,
    pub seed: u64,
    pub trees: Vec<TreeModel>,
    pub bag_records: Vec<BagRecord>,
    /// Mean per-tree impurity decrease per feature; present when grown
    /// with [`ImportanceMode::Gini`].
    pub gini_importance: Option<Vec<f64>>,
}

impl ForestModel {
    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}

/// Grow a single tree on the given bootstrap sample. Useful for tests and
/// incremental experiments; [`grow_forest`] is the production entry point.
pub fn grow_tree(
    dataset: &Dataset,
    config: &GrowConfig,
    bag: &BagRecord,
    rng: &mut RngStream,
) -> Result<TreeModel> {
    let resolved = resolve(config, dataset)?;
    if bag.inbag_counts.len() != dataset.n_samples() {
        return Err(GroveError::Data(format!(
            "bag covers {} rows, dataset has {}",
            bag.inbag_counts.len(),
            dataset.n_samples()
        )));
    }
    if bag.inbag_counts.iter().all(|&c| c == 0) {
        return Err(GroveError::Data("bag has no in-bag samples".into()));
    }
    let sorted_index = match resolved.memory_mode {
        MemoryMode::RuntimeOptimized => dataset.sorted_index(),
        _ => None,
    };
    let mut grower = TreeGrower::new(dataset, &resolved, sorted_index);
    Ok(grower.grow(bag, rng))
}

fn build_local_index(dataset: &Dataset) -> Vec<Vec<u32>> {
    (0..dataset.n_features())
        .into_par_iter()
        .map(|feature| match dataset.feature(feature).view() {
            ColumnView::Dense(values) => stable_argsort(values),
            ColumnView::Packed(_) => Vec::new(),
        })
        .collect()
}

/// Grow a full forest. Tree `t` draws its bootstrap sample and all node
/// randomness from a stream derived from `(seed, t)`, so results do not
/// depend on the worker count.
pub fn grow_forest(dataset: &Dataset, config: &GrowConfig) -> Result<ForestModel> {
    let resolved = resolve(config, dataset)?;
    let n = dataset.n_samples();

    let local_index = match (resolved.memory_mode, dataset.sorted_index()) {
        (MemoryMode::RuntimeOptimized, None) => Some(build_local_index(dataset)),
        _ => None,
    };
    let sorted_index: Option<&[Vec<u32>]> = match resolved.memory_mode {
        MemoryMode::RuntimeOptimized => dataset.sorted_index().or(local_index.as_deref()),
        _ => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count.unwrap_or(0))
        .build()
        .map_err(|e| GroveError::Config(format!("cannot build worker pool: {e}")))?;
    let grown: Vec<(TreeModel, BagRecord, Vec<f64>)> = pool.install(|| {
        (0..config.num_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = RngStream::for_tree(config.seed, t);
                let bag = bootstrap(n, &mut rng);
                let mut grower = TreeGrower::new(dataset, &resolved, sorted_index);
                let tree = grower.grow(&bag, &mut rng);
                let partial = grower.into_impurity_partial();
                (tree, bag, partial)
            })
            .collect()
    });

    let mut trees = Vec::with_capacity(grown.len());
    let mut bag_records = Vec::with_capacity(grown.len());
    let mut importance_sums = if resolved.accumulate_impurity {
        Some(vec![0.0; dataset.n_features()])
    } else {
        None
    };
    for (tree, bag, partial) in grown {
        if let Some(sums) = &mut importance_sums {
            for (sum, value) in sums.iter_mut().zip(&partial) {
                *sum += value;
            }
        }
        trees.push(tree);
        bag_records.push(bag);
    }
    let gini_importance = importance_sums.map(|mut sums| {
        for sum in &mut sums {
            *sum /= config.num_trees as f64;
        }
        sums
    });

    let classes = match dataset.response() {
        Response::Classification { classes, .. } => classes.clone(),
        _ => Vec::new(),
    };
    Ok(ForestModel {
        tree_type: resolved.tree_type,
        memory_mode: resolved.memory_mode,
        feature_names: dataset
            .feature_names()
            .into_iter()
            .map(String::from)
            .collect(),
        classes,
        timepoints: resolved.timepoints,
        mtry: resolved.mtry,
        min_node_size: resolved.min_node_size,
        seed: config.seed,
        trees,
        bag_records,
        gini_importance,
    })
}

/// Feature columns arranged in the forest's training order, matched by
/// name; the prediction data may order or intersperse its columns freely.
#[derive(Debug)]
pub struct PredictorView<'a> {
    columns: Vec<ColumnView<'a>>,
    n_rows: usize,
}

impl<'a> PredictorView<'a> {
    pub fn from_dataset(forest: &ForestModel, dataset: &'a Dataset) -> Result<Self> {
        let names = dataset.feature_names();
        let views: Vec<ColumnView<'a>> = (0..dataset.n_features())
            .map(|j| dataset.feature(j).view())
            .collect();
        Self::build(forest, &names, &views, dataset.n_samples())
    }

    /// Build from borrowed dense columns, e.g. a parsed prediction table.
    pub fn from_named_columns(
        forest: &ForestModel,
        names: &[&str],
        columns: &[&'a [f64]],
        n_rows: usize,
    ) -> Result<Self> {
        if let Some(short) = columns.iter().position(|c| c.len() != n_rows) {
            return Err(GroveError::Data(format!(
                "column \"{}\" has {} rows, expected {n_rows}",
                names[short],
                columns[short].len()
            )));
        }
        let views: Vec<ColumnView<'a>> = columns.iter().map(|&c| ColumnView::Dense(c)).collect();
        Self::build(forest, names, &views, n_rows)
    }

    fn build(
        forest: &ForestModel,
        names: &[&str],
        views: &[ColumnView<'a>],
        n_rows: usize,
    ) -> Result<Self> {
        let mut columns = Vec::with_capacity(forest.n_features());
        let mut missing = Vec::new();
        for wanted in &forest.feature_names {
            match names.iter().position(|n| n == wanted) {
                Some(j) => columns.push(views[j]),
                None => missing.push(wanted.as_str()),
            }
        }
        if !missing.is_empty() {
            return Err(GroveError::Schema(format!(
                "prediction data is missing feature(s): {}",
                missing.join(", ")
            )));
        }
        Ok(PredictorView { columns, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub(crate) fn value(&self, feature: usize, row: usize) -> f64 {
        self.columns[feature].value(row)
    }
}

/// Ensemble predictions; the variant matches the forest's tree type.
#[derive(Debug, Clone, PartialEq)]
pub enum ForestPrediction {
    /// Majority-vote class index per row (ties pick the lowest index).
    Classes(Vec<u32>),
    /// Mean of the trees' terminal means per row.
    Values(Vec<f64>),
    /// Per-row class probabilities, averaged over trees.
    Probabilities(Vec<Vec<f64>>),
    /// Per-row survival curves over the forest time points, averaged over
    /// trees.
    Curves(Vec<Vec<f64>>),
}

/// Index of the first maximum.
pub(crate) fn argmax_first<T: PartialOrd>(values: &[T]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

fn tree_leaf<'t>(tree: &'t TreeModel, data: &PredictorView, row: usize) -> &'t LeafPayload {
    tree.leaf_for(|feature| data.value(feature, row))
}

/// Predict every row of `data` with the whole forest. Rows are independent;
/// per row, trees contribute in index order.
pub fn predict_forest(forest: &ForestModel, data: &PredictorView) -> Result<ForestPrediction> {
    if forest.trees.is_empty() {
        return Err(GroveError::Config("forest has no trees".into()));
    }
    let n_rows = data.n_rows();
    let num_trees = forest.trees.len() as f64;
    match forest.tree_type {
        TreeType::Classification => {
            let classes: Vec<u32> = (0..n_rows)
                .into_par_iter()
                .map(|row| {
                    let mut votes = vec![0u32; forest.classes.len()];
                    for tree in &forest.trees {
                        match tree_leaf(tree, data, row) {
                            LeafPayload::Class(c) => votes[*c as usize] += 1,
                            _ => unreachable!("classification tree with non-class leaf"),
                        }
                    }
                    argmax_first(&votes) as u32
                })
                .collect();
            Ok(ForestPrediction::Classes(classes))
        }
        TreeType::Regression => {
            let values: Vec<f64> = (0..n_rows)
                .into_par_iter()
                .map(|row| {
                    let mut sum = 0.0;
                    for tree in &forest.trees {
                        match tree_leaf(tree, data, row) {
                            LeafPayload::Value(v) => sum += v,
                            _ => unreachable!("regression tree with non-value leaf"),
                        }
                    }
                    sum / num_trees
                })
                .collect();
            Ok(ForestPrediction::Values(values))
        }
        TreeType::Probability => {
            let rows: Vec<Vec<f64>> = (0..n_rows)
                .into_par_iter()
                .map(|row| {
                    let mut sums = vec![0.0; forest.classes.len()];
                    for tree in &forest.trees {
                        match tree_leaf(tree, data, row) {
                            LeafPayload::Frequencies(freq) => {
                                for (sum, f) in sums.iter_mut().zip(freq) {
                                    *sum += f;
                                }
                            }
                            _ => unreachable!("probability tree with non-frequency leaf"),
                        }
                    }
                    for sum in &mut sums {
                        *sum /= num_trees;
                    }
                    sums
                })
                .collect();
            Ok(ForestPrediction::Probabilities(rows))
        }
        TreeType::Survival => {
            let rows: Vec<Vec<f64>> = (0..n_rows)
                .into_par_iter()
                .map(|row| {
                    let mut sums = vec![0.0; forest.timepoints.len()];
                    for tree in &forest.trees {
                        match tree_leaf(tree, data, row) {
                            LeafPayload::Curve(curve) => {
                                for (sum, s) in sums.iter_mut().zip(curve) {
                                    *sum += s;
                                }
                            }
                            _ => unreachable!("survival tree with non-curve leaf"),
                        }
                    }
                    for sum in &mut sums {
                        *sum /= num_trees;
                    }
                    sums
                })
                .collect();
            Ok(ForestPrediction::Curves(rows))
        }
    }
}
