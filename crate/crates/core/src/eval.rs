//! Out-of-bag evaluation, error measures, and variable importance.
//!
//! Out-of-bag (OOB) prediction aggregates, per sample, only the trees
//! whose bootstrap sample left that row out, giving an internal estimate of
//! generalization error without a held-out set.

use rayon::prelude::*;

use crate::data::{Dataset, Response};
use crate::error::{GroveError, Result};
use crate::forest::{
    argmax_first, ForestModel, ImportanceMode, LeafPayload, PredictorView, TreeModel, TreeType,
};
use crate::sampling::{permute, RngStream};

/// Out-of-bag predictions per training row; `None` for rows that were
/// in-bag in every tree.
#[derive(Debug, Clone)]
pub enum OobPredictions {
    Classes(Vec<Option<u32>>),
    Values(Vec<Option<f64>>),
    Probabilities(Vec<Option<Vec<f64>>>),
    /// Mortality-style risk scores (sum of 1 - S over the time grid).
    Risks(Vec<Option<f64>>),
}

/// Out-of-bag error and the per-row predictions behind it.
#[derive(Debug, Clone)]
pub struct OobSummary {
    /// Misclassification rate, mean squared error, mean squared error of
    /// the true-class probability, or 1 minus the concordance index,
    /// depending on the tree type.
    pub error: f64,
    pub predictions: OobPredictions,
}

/// Variable importance values in training feature order.
#[derive(Debug, Clone)]
pub struct ImportanceReport {
    pub mode: ImportanceMode,
    pub values: Vec<f64>,
    /// Standard errors of the per-tree importance means; present for the
    /// scaled permutation mode.
    pub std_errors: Option<Vec<f64>>,
}

fn check_bags(forest: &ForestModel, dataset: &Dataset) -> Result<()> {
    if forest.bag_records.len() != forest.trees.len() || forest.trees.is_empty() {
        return Err(GroveError::NoOob(
            "forest carries no bag records; out-of-bag evaluation needs a freshly grown forest"
                .into(),
        ));
    }
    if forest.bag_records[0].inbag_counts.len() != dataset.n_samples() {
        return Err(GroveError::Data(format!(
            "forest was grown on {} rows, dataset has {}",
            forest.bag_records[0].inbag_counts.len(),
            dataset.n_samples()
        )));
    }
    Ok(())
}

fn survival_risk(curve_sums: &[f64], count: f64) -> f64 {
    let mut risk = 0.0;
    for &sum in curve_sums {
        risk += 1.0 - sum / count;
    }
    risk
}

/// Out-of-bag error of a freshly grown forest against its training data.
pub fn oob_error(forest: &ForestModel, dataset: &Dataset) -> Result<OobSummary> {
    check_bags(forest, dataset)?;
    let view = PredictorView::from_dataset(forest, dataset)?;
    let n = dataset.n_samples();

    match (forest.tree_type, dataset.response()) {
        (TreeType::Classification, Response::Classification { labels, .. }) => {
            let k = forest.classes.len();
            let mut votes = vec![0u32; n * k];
            for (tree, bag) in forest.trees.iter().zip(&forest.bag_records) {
                for &row in &bag.oob_indices {
                    match tree.leaf_for(|j| view.value(j, row as usize)) {
                        LeafPayload::Class(c) => votes[row as usize * k + *c as usize] += 1,
                        _ => unreachable!("classification tree with non-class leaf"),
                    }
                }
            }
            let mut predictions = vec![None; n];
            let mut covered = 0u64;
            let mut wrong = 0u64;
            for row in 0..n {
                let row_votes = &votes[row * k..(row + 1) * k];
                if row_votes.iter().all(|&v| v == 0) {
                    continue;
                }
                let winner = argmax_first(row_votes) as u32;
                predictions[row] = Some(winner);
                covered += 1;
                if winner != labels[row] {
                    wrong += 1;
                }
            }
            if covered == 0 {
                return Err(GroveError::NoOob(
                    "no sample was out-of-bag in any tree".into(),
                ));
            }
            Ok(OobSummary {
                error: wrong as f64 / covered as f64,
                predictions: OobPredictions::Classes(predictions),
            })
        }
        (TreeType::Regression, Response::Regression { values }) => {
            let mut sums = vec![0.0; n];
            let mut counts = vec![0u32; n];
            for (tree, bag) in forest.trees.iter().zip(&forest.bag_records) {
                for &row in &bag.oob_indices {
                    match tree.leaf_for(|j| view.value(j, row as usize)) {
                        LeafPayload::Value(v) => {
                            sums[row as usize] += v;
                            counts[row as usize] += 1;
                        }
                        _ => unreachable!("regression tree with non-value leaf"),
                    }
                }
            }
            let mut predictions = vec![None; n];
            let mut squared = 0.0;
            let mut covered = 0u64;
            for row in 0..n {
                if counts[row] == 0 {
                    continue;
                }
                let mean = sums[row] / counts[row] as f64;
                predictions[row] = Some(mean);
                let diff = mean - values[row];
                squared += diff * diff;
                covered += 1;
            }
            if covered == 0 {
                return Err(GroveError::NoOob(
                    "no sample was out-of-bag in any tree".into(),
                ));
            }
            Ok(OobSummary {
                error: squared / covered as f64,
                predictions: OobPredictions::Values(predictions),
            })
        }
        (TreeType::Probability, Response::Classification { labels, .. }) => {
            let k = forest.classes.len();
            let mut sums = vec![0.0; n * k];
            let mut counts = vec![0u32; n];
            for (tree, bag) in forest.trees.iter().zip(&forest.bag_records) {
                for &row in &bag.oob_indices {
                    match tree.leaf_for(|j| view.value(j, row as usize)) {
                        LeafPayload::Frequencies(freq) => {
                            let base = row as usize * k;
                            for (slot, f) in sums[base..base + k].iter_mut().zip(freq) {
                                *slot += f;
                            }
                            counts[row as usize] += 1;
                        }
                        _ => unreachable!("probability tree with non-frequency leaf"),
                    }
                }
            }
            let mut predictions = vec![None; n];
            let mut squared = 0.0;
            let mut covered = 0u64;
            for row in 0..n {
                if counts[row] == 0 {
                    continue;
                }
                let count = counts[row] as f64;
                let mean: Vec<f64> = sums[row * k..(row + 1) * k]
                    .iter()
                    .map(|&s| s / count)
                    .collect();
                let miss = 1.0 - mean[labels[row] as usize];
                squared += miss * miss;
                predictions[row] = Some(mean);
                covered += 1;
            }
            if covered == 0 {
                return Err(GroveError::NoOob(
                    "no sample was out-of-bag in any tree".into(),
                ));
            }
            Ok(OobSummary {
                error: squared / covered as f64,
                predictions: OobPredictions::Probabilities(predictions),
            })
        }
        (TreeType::Survival, Response::Survival { times, statuses }) => {
            let t = forest.timepoints.len();
            let mut sums = vec![0.0; n * t];
            let mut counts = vec![0u32; n];
            for (tree, bag) in forest.trees.iter().zip(&forest.bag_records) {
                for &row in &bag.oob_indices {
                    match tree.leaf_for(|j| view.value(j, row as usize)) {
                        LeafPayload::Curve(curve) => {
                            let base = row as usize * t;
                            for (slot, s) in sums[base..base + t].iter_mut().zip(curve) {
                                *slot += s;
                            }
                            counts[row as usize] += 1;
                        }
                        _ => unreachable!("survival tree with non-curve leaf"),
                    }
                }
            }
            let mut predictions = vec![None; n];
            let mut covered_times = Vec::new();
            let mut covered_statuses = Vec::new();
            let mut covered_risks = Vec::new();
            for row in 0..n {
                if counts[row] == 0 {
                    continue;
                }
                let risk = survival_risk(&sums[row * t..(row + 1) * t], counts[row] as f64);
                predictions[row] = Some(risk);
                covered_times.push(times[row]);
                covered_statuses.push(statuses[row]);
                covered_risks.push(risk);
            }
            if covered_risks.is_empty() {
                return Err(GroveError::NoOob(
                    "no sample was out-of-bag in any tree".into(),
                ));
            }
            let concordance = c_index(&covered_times, &covered_statuses, &covered_risks)?;
            Ok(OobSummary {
                error: 1.0 - concordance,
                predictions: OobPredictions::Risks(predictions),
            })
        }
        _ => Err(GroveError::Config(
            "forest tree type does not match the dataset response".into(),
        )),
    }
}

/// Harrell's concordance index. A pair is usable when one subject is known
/// to fail first: its time is shorter and it had an event, or the times tie
/// and it had an event while the other was censored. Concordant pairs rank
/// the earlier failure at higher risk; tied risks count half.
pub fn c_index(times: &[f64], statuses: &[u8], risks: &[f64]) -> Result<f64> {
    if times.len() != statuses.len() || times.len() != risks.len() {
        return Err(GroveError::Data(
            "times, statuses and risks must have equal length".into(),
        ));
    }
    let n = times.len();
    let mut comparable = 0u64;
    let mut concordant = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (first, second) = if fails_first(times[i], statuses[i], times[j], statuses[j]) {
                (i, j)
            } else if fails_first(times[j], statuses[j], times[i], statuses[i]) {
                (j, i)
            } else {
                continue;
            };
            comparable += 1;
            if risks[first] > risks[second] {
                concordant += 1.0;
            } else if risks[first] == risks[second] {
                concordant += 0.5;
            }
        }
    }
    if comparable == 0 {
        return Err(GroveError::Data(
            "no usable pairs for the concordance index".into(),
        ));
    }
    Ok(concordant / comparable as f64)
}

#[inline]
fn fails_first(time_a: f64, status_a: u8, time_b: f64, status_b: u8) -> bool {
    status_a == 1 && (time_a < time_b || (time_a == time_b && status_b == 0))
}

/// Confusion matrix with one row per true class and one column per
/// predicted class.
pub fn confusion_matrix(
    truth: &[u32],
    predicted: &[u32],
    n_classes: usize,
) -> Result<Vec<Vec<u64>>> {
    if truth.len() != predicted.len() {
        return Err(GroveError::Data(
            "truth and prediction lengths differ".into(),
        ));
    }
    let mut matrix = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t as usize >= n_classes || p as usize >= n_classes {
            return Err(GroveError::Data(format!(
                "class index out of range: truth {t}, predicted {p}"
            )));
        }
        matrix[t as usize][p as usize] += 1;
    }
    Ok(matrix)
}

/// Impurity (Gini/variance/log-rank gain) importance accumulated during
/// growth: per feature, the gains of every node split on it, weighted by
/// node size over bag size, averaged over trees.
pub fn gini_importance(forest: &ForestModel) -> Result<ImportanceReport> {
    match &forest.gini_importance {
        Some(values) => Ok(ImportanceReport {
            mode: ImportanceMode::Gini,
            values: values.clone(),
            std_errors: None,
        }),
        None => Err(GroveError::Config(
            "forest was grown without impurity importance accumulation".into(),
        )),
    }
}

struct TreeMeasure<'a> {
    tree: &'a TreeModel,
    view: &'a PredictorView<'a>,
    oob: &'a [u32],
    n_timepoints: usize,
}

impl<'a> TreeMeasure<'a> {
    /// Prediction accuracy measure of one tree over its OOB rows, with one
    /// feature column optionally overridden by permuted values. Higher is
    /// better for every tree type (accuracy, negative squared error, or
    /// concordance).
    fn measure(
        &self,
        response: &Response,
        forest_type: TreeType,
        overridden: Option<(usize, &[f64])>,
    ) -> Option<f64> {
        let value_at = |feature: usize, position: usize, row: usize| -> f64 {
            match overridden {
                Some((j, values)) if j == feature => values[position],
                _ => self.view.value(feature, row),
            }
        };
        match (forest_type, response) {
            (TreeType::Classification, Response::Classification { labels, .. }) => {
                let mut correct = 0u64;
                for (position, &row) in self.oob.iter().enumerate() {
                    let leaf = self
                        .tree
                        .leaf_for(|feature| value_at(feature, position, row as usize));
                    match leaf {
                        LeafPayload::Class(c) => {
                            if *c == labels[row as usize] {
                                correct += 1;
                            }
                        }
                        _ => unreachable!(),
                    }
                }
                Some(correct as f64 / self.oob.len() as f64)
            }
            (TreeType::Probability, Response::Classification { labels, .. }) => {
                let mut squared = 0.0;
                for (position, &row) in self.oob.iter().enumerate() {
                    let leaf = self
                        .tree
                        .leaf_for(|feature| value_at(feature, position, row as usize));
                    match leaf {
                        LeafPayload::Frequencies(freq) => {
                            let miss = 1.0 - freq[labels[row as usize] as usize];
                            squared += miss * miss;
                        }
                        _ => unreachable!(),
                    }
                }
                Some(-(squared / self.oob.len() as f64))
            }
            (TreeType::Regression, Response::Regression { values }) => {
                let mut squared = 0.0;
                for (position, &row) in self.oob.iter().enumerate() {
                    let leaf = self
                        .tree
                        .leaf_for(|feature| value_at(feature, position, row as usize));
                    match leaf {
                        LeafPayload::Value(v) => {
                            let diff = v - values[row as usize];
                            squared += diff * diff;
                        }
                        _ => unreachable!(),
                    }
                }
                Some(-(squared / self.oob.len() as f64))
            }
            (TreeType::Survival, Response::Survival { times, statuses }) => {
                let mut oob_times = Vec::with_capacity(self.oob.len());
                let mut oob_statuses = Vec::with_capacity(self.oob.len());
                let mut risks = Vec::with_capacity(self.oob.len());
                for (position, &row) in self.oob.iter().enumerate() {
                    let leaf = self
                        .tree
                        .leaf_for(|feature| value_at(feature, position, row as usize));
                    match leaf {
                        LeafPayload::Curve(curve) => {
                            debug_assert_eq!(curve.len(), self.n_timepoints);
                            let mut risk = 0.0;
                            for &s in curve {
                                risk += 1.0 - s;
                            }
                            risks.push(risk);
                        }
                        _ => unreachable!(),
                    }
                    oob_times.push(times[row as usize]);
                    oob_statuses.push(statuses[row as usize]);
                }
                c_index(&oob_times, &oob_statuses, &risks).ok()
            }
            _ => unreachable!("checked before the per-tree loop"),
        }
    }
}

/// Permutation importance: per tree and feature, the drop in OOB accuracy
/// (or rise in error) after permuting that feature's OOB values, averaged
/// over trees. Trees with fewer than two OOB samples are skipped. The
/// scaled mode divides each mean by its standard error; features with zero
/// spread and zero mean report 0.
pub fn permutation_importance(
    forest: &ForestModel,
    dataset: &Dataset,
    mode: ImportanceMode,
) -> Result<ImportanceReport> {
    if mode != ImportanceMode::PermutationRaw && mode != ImportanceMode::PermutationScaled {
        return Err(GroveError::Config(
            "permutation importance requires a permutation mode".into(),
        ));
    }
    check_bags(forest, dataset)?;
    match (forest.tree_type, dataset.response()) {
        (TreeType::Classification | TreeType::Probability, Response::Classification { .. })
        | (TreeType::Regression, Response::Regression { .. })
        | (TreeType::Survival, Response::Survival { .. }) => {}
        _ => {
            return Err(GroveError::Config(
                "forest tree type does not match the dataset response".into(),
            ))
        }
    }
    let view = PredictorView::from_dataset(forest, dataset)?;
    let p = dataset.n_features();
    let response = dataset.response();

    let per_tree: Vec<Option<Vec<f64>>> = (0..forest.trees.len())
        .into_par_iter()
        .map(|t| {
            let bag = &forest.bag_records[t];
            let oob = bag.oob_indices.as_slice();
            if oob.len() < 2 {
                return None;
            }
            let measurer = TreeMeasure {
                tree: &forest.trees[t],
                view: &view,
                oob,
                n_timepoints: forest.timepoints.len(),
            };
            let baseline = measurer.measure(response, forest.tree_type, None)?;
            let mut deltas = Vec::with_capacity(p);
            let mut permuted = Vec::with_capacity(oob.len());
            for feature in 0..p {
                permuted.clear();
                permuted.extend(oob.iter().map(|&row| view.value(feature, row as usize)));
                let mut rng = RngStream::for_permutation(forest.seed, t, feature);
                permute(&mut permuted, &mut rng);
                let shuffled = measurer
                    .measure(response, forest.tree_type, Some((feature, &permuted)))
                    .expect("permutation keeps the measure defined");
                deltas.push(baseline - shuffled);
            }
            Some(deltas)
        })
        .collect();

    let contributing: Vec<&Vec<f64>> = per_tree.iter().flatten().collect();
    let used = contributing.len();
    if used == 0 {
        return Err(GroveError::NoOob(
            "no tree had enough out-of-bag samples for permutation importance".into(),
        ));
    }
    let mut means = vec![0.0; p];
    for deltas in &contributing {
        for (mean, &d) in means.iter_mut().zip(deltas.iter()) {
            *mean += d;
        }
    }
    for mean in &mut means {
        *mean /= used as f64;
    }
    if mode == ImportanceMode::PermutationRaw {
        return Ok(ImportanceReport {
            mode,
            values: means,
            std_errors: None,
        });
    }

    let mut std_errors = vec![0.0; p];
    if used > 1 {
        for (feature, se) in std_errors.iter_mut().enumerate() {
            let mut sum_sq = 0.0;
            for deltas in &contributing {
                let diff = deltas[feature] - means[feature];
                sum_sq += diff * diff;
            }
            let sd = (sum_sq / (used as f64 - 1.0)).sqrt();
            *se = sd / (used as f64).sqrt();
        }
    }
    let values = means
        .iter()
        .zip(&std_errors)
        .map(|(&mean, &se)| {
            if se == 0.0 && mean == 0.0 {
                0.0
            } else {
                mean / se
            }
        })
        .collect();
    Ok(ImportanceReport {
        mode,
        values,
        std_errors: Some(std_errors),
    })
}
