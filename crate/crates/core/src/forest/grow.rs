//! Depth-first tree growth over bootstrap samples.

use super::survival::terminal_survival_curve;
use super::tree::{LeafPayload, TreeModel};
use super::{ResolvedGrow, TreeType};
use crate::data::{Dataset, Response, StorageKind};
use crate::sampling::{sample_without_replacement, BagRecord, RngStream};
use crate::split::{
    search_fixed_levels, search_presorted, search_sort_on_demand, select_split_strategy,
    NodeKernel, ResponseView, SplitResult, SplitStrategy,
};

/// Per-tree growth state; scratch buffers are reused across nodes.
pub(crate) struct TreeGrower<'c, 'a> {
    dataset: &'a Dataset,
    cfg: &'c ResolvedGrow,
    resp: ResponseView<'a>,
    sorted_index: Option<&'c [Vec<u32>]>,
    node_counts: Vec<u32>,
    sort_scratch: Vec<(f64, u32)>,
    impurity_partial: Vec<f64>,
}

impl<'c, 'a> TreeGrower<'c, 'a> {
    pub fn new(
        dataset: &'a Dataset,
        cfg: &'c ResolvedGrow,
        sorted_index: Option<&'c [Vec<u32>]>,
    ) -> Self {
        let resp = ResponseView::for_criterion(cfg.criterion, dataset.response())
            .expect("criterion resolved against this response");
        let impurity_partial = if cfg.accumulate_impurity {
            vec![0.0; dataset.n_features()]
        } else {
            Vec::new()
        };
        TreeGrower {
            dataset,
            cfg,
            resp,
            sorted_index,
            node_counts: vec![0; dataset.n_samples()],
            sort_scratch: Vec::new(),
            impurity_partial,
        }
    }

    pub fn grow(&mut self, bag: &BagRecord, rng: &mut RngStream) -> TreeModel {
        let mut root = Vec::with_capacity(self.dataset.n_samples());
        for (sid, &count) in bag.inbag_counts.iter().enumerate() {
            for _ in 0..count {
                root.push(sid as u32);
            }
        }
        let n_inbag = root.len() as f64;

        let mut tree = TreeModel::default();
        tree.push_placeholder();
        let mut stack: Vec<(usize, Vec<u32>)> = vec![(0, root)];
        while let Some((node_idx, members)) = stack.pop() {
            match self.find_split(&members, rng) {
                None => self.seal_leaf(&mut tree, node_idx, &members),
                Some(split) => {
                    if !self.impurity_partial.is_empty() {
                        self.impurity_partial[split.feature] +=
                            members.len() as f64 / n_inbag * split.gain;
                    }
                    let column = self.dataset.feature(split.feature).view();
                    let mut left = Vec::new();
                    let mut right = Vec::new();
                    for &sid in &members {
                        if column.value(sid as usize) <= split.threshold {
                            left.push(sid);
                        } else {
                            right.push(sid);
                        }
                    }
                    debug_assert!(!left.is_empty() && !right.is_empty());
                    let left_idx = tree.push_placeholder();
                    let right_idx = tree.push_placeholder();
                    tree.split_feature[node_idx] = split.feature as u32;
                    tree.split_value[node_idx] = split.threshold;
                    tree.left_child[node_idx] = left_idx as u32;
                    tree.right_child[node_idx] = right_idx as u32;
                    stack.push((right_idx, right));
                    stack.push((left_idx, left));
                }
            }
        }
        tree
    }

    pub fn into_impurity_partial(self) -> Vec<f64> {
        self.impurity_partial
    }

    /// Best split over a fresh draw of `mtry` candidate features, or `None`
    /// to make the node terminal: too small, already pure, or no candidate
    /// with positive gain.
    fn find_split(&mut self, members: &[u32], rng: &mut RngStream) -> Option<SplitResult> {
        if members.len() <= self.cfg.min_node_size {
            return None;
        }
        let mut kernel = NodeKernel::new(self.resp, members);
        if kernel.node_is_pure() {
            return None;
        }
        let candidates =
            sample_without_replacement(self.dataset.n_features(), self.cfg.mtry, rng)
                .expect("mtry validated against feature count");

        let mut counts_filled = false;
        let mut best: Option<SplitResult> = None;
        for &feature in &candidates {
            let column = self.dataset.feature(feature);
            let outcome = match self.strategy_for(members.len(), column.kind()) {
                SplitStrategy::FixedLevels => {
                    search_fixed_levels(&column.view(), members, &mut kernel)
                        .expect("packed columns hold genotype codes")
                }
                SplitStrategy::SortOnDemand => search_sort_on_demand(
                    &column.view(),
                    members,
                    &mut kernel,
                    &mut self.sort_scratch,
                ),
                SplitStrategy::Presorted => {
                    if !counts_filled {
                        for &sid in members {
                            self.node_counts[sid as usize] += 1;
                        }
                        counts_filled = true;
                    }
                    let sorted_rows =
                        &self.sorted_index.expect("strategy requires the index")[feature];
                    search_presorted(
                        &column.view(),
                        sorted_rows,
                        &self.node_counts,
                        members.len(),
                        &mut kernel,
                    )
                }
            };
            if let Some(found) = outcome {
                if best.map_or(true, |b| found.gain > b.gain) {
                    best = Some(SplitResult {
                        feature,
                        threshold: found.threshold,
                        gain: found.gain,
                    });
                }
            }
        }
        if counts_filled {
            for &sid in members {
                self.node_counts[sid as usize] = 0;
            }
        }
        best
    }

    fn strategy_for(&self, node_size: usize, storage: StorageKind) -> SplitStrategy {
        let strategy = select_split_strategy(
            node_size,
            self.cfg.memory_mode,
            storage,
            self.cfg.large_node_threshold,
        );
        if strategy == SplitStrategy::Presorted && self.sorted_index.is_none() {
            SplitStrategy::SortOnDemand
        } else {
            strategy
        }
    }

    fn seal_leaf(&self, tree: &mut TreeModel, node_idx: usize, members: &[u32]) {
        let payload = match (self.cfg.tree_type, self.dataset.response()) {
            (TreeType::Classification, Response::Classification { labels, .. }) => {
                let mut counts = vec![0u32; self.cfg.n_classes];
                for &sid in members {
                    counts[labels[sid as usize] as usize] += 1;
                }
                let mut best = 0;
                for (class, &count) in counts.iter().enumerate() {
                    if count > counts[best] {
                        best = class;
                    }
                }
                LeafPayload::Class(best as u32)
            }
            (TreeType::Probability, Response::Classification { labels, .. }) => {
                let mut freq = vec![0.0; self.cfg.n_classes];
                for &sid in members {
                    freq[labels[sid as usize] as usize] += 1.0;
                }
                let n = members.len() as f64;
                for f in &mut freq {
                    *f /= n;
                }
                LeafPayload::Frequencies(freq)
            }
            (TreeType::Regression, Response::Regression { values }) => {
                let sum: f64 = members.iter().map(|&sid| values[sid as usize]).sum();
                LeafPayload::Value(sum / members.len() as f64)
            }
            (TreeType::Survival, Response::Survival { times, statuses }) => {
                LeafPayload::Curve(terminal_survival_curve(
                    times,
                    statuses,
                    members,
                    &self.cfg.timepoints,
                ))
            }
            _ => unreachable!("tree type resolved against this response"),
        };
        let payload_idx = tree.payloads.len() as u32;
        tree.payloads.push(payload);
        tree.payload_index[node_idx] = payload_idx;
    }
}
