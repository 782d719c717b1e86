//! Deliberately plain reference random forest for classification.
//!
//! This is an independent implementation used to cross-check the engine's
//! out-of-bag error: recursive tree growth, an exhaustive splitter that
//! re-sorts and re-counts at every node, its own random number generator,
//! and no shared code with the optimized search paths. It is single
//! threaded and makes no attempt to be fast.

use grove_core::{GroveError, Result};

/// xorshift64* generator, unrelated to the engine's stream cipher.
struct OracleRng {
    state: u64,
}

impl OracleRng {
    fn new(seed: u64) -> Self {
        let mut state = seed ^ 0x9E37_79B9_7F4A_7C15;
        if state == 0 {
            state = 0x1234_5678_9ABC_DEF1;
        }
        OracleRng { state }
    }

    fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Uniform k-subset, ascending so that gain ties resolve toward the
    /// lowest feature index, the same policy the engine follows.
    fn choose(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool.sort_unstable();
        pool
    }
}

/// Settings for the reference forest.
#[derive(Debug, Clone)]
pub struct NaiveConfig {
    pub num_trees: usize,
    pub mtry: usize,
    pub min_node_size: usize,
    pub seed: u64,
}

enum NaiveNode {
    Leaf {
        class: u32,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<NaiveNode>,
        right: Box<NaiveNode>,
    },
}

fn gini(counts: &[usize], total: usize) -> f64 {
    let mut sum_sq = 0.0;
    for &c in counts {
        let p = c as f64 / total as f64;
        sum_sq += p * p;
    }
    1.0 - sum_sq
}

fn majority(counts: &[usize]) -> u32 {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best as u32
}

fn class_counts(labels: &[u32], members: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n_classes];
    for &i in members {
        counts[labels[i] as usize] += 1;
    }
    counts
}

fn best_split_exhaustive(
    columns: &[Vec<f64>],
    labels: &[u32],
    members: &[usize],
    n_classes: usize,
    candidates: &[usize],
) -> Option<(usize, f64, f64)> {
    let n = members.len();
    let parent_counts = class_counts(labels, members, n_classes);
    let parent_gini = gini(&parent_counts, n);

    let mut best: Option<(usize, f64, f64)> = None;
    for &feature in candidates {
        let mut pairs: Vec<(f64, u32)> = members
            .iter()
            .map(|&i| (columns[feature][i], labels[i]))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let mut left_counts = vec![0usize; n_classes];
        for boundary in 1..n {
            left_counts[pairs[boundary - 1].1 as usize] += 1;
            if pairs[boundary].0 == pairs[boundary - 1].0 {
                continue;
            }
            let n_left = boundary;
            let right_counts: Vec<usize> = parent_counts
                .iter()
                .zip(&left_counts)
                .map(|(&p, &l)| p - l)
                .collect();
            let weighted = n_left as f64 / n as f64 * gini(&left_counts, n_left)
                + (n - n_left) as f64 / n as f64 * gini(&right_counts, n - n_left);
            let gain = parent_gini - weighted;
            if gain > 0.0 && best.map_or(true, |(_, _, g)| gain > g) {
                let mut threshold = (pairs[boundary - 1].0 + pairs[boundary].0) / 2.0;
                if threshold >= pairs[boundary].0 {
                    threshold = pairs[boundary - 1].0;
                }
                best = Some((feature, threshold, gain));
            }
        }
    }
    best
}

fn grow_naive_tree(
    columns: &[Vec<f64>],
    labels: &[u32],
    members: Vec<usize>,
    n_classes: usize,
    cfg: &NaiveConfig,
    rng: &mut OracleRng,
) -> NaiveNode {
    let counts = class_counts(labels, &members, n_classes);
    if members.len() <= cfg.min_node_size || counts.iter().any(|&c| c == members.len()) {
        return NaiveNode::Leaf {
            class: majority(&counts),
        };
    }
    let candidates = rng.choose(columns.len(), cfg.mtry);
    match best_split_exhaustive(columns, labels, &members, n_classes, &candidates) {
        None => NaiveNode::Leaf {
            class: majority(&counts),
        },
        Some((feature, threshold, _)) => {
            let (left, right): (Vec<usize>, Vec<usize>) = members
                .into_iter()
                .partition(|&i| columns[feature][i] <= threshold);
            NaiveNode::Split {
                feature,
                threshold,
                left: Box::new(grow_naive_tree(columns, labels, left, n_classes, cfg, rng)),
                right: Box::new(grow_naive_tree(columns, labels, right, n_classes, cfg, rng)),
            }
        }
    }
}

fn predict(node: &NaiveNode, columns: &[Vec<f64>], row: usize) -> u32 {
    match node {
        NaiveNode::Leaf { class } => *class,
        NaiveNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if columns[*feature][row] <= *threshold {
                predict(left, columns, row)
            } else {
                predict(right, columns, row)
            }
        }
    }
}

/// Grows the reference forest and returns its out-of-bag misclassification
/// rate: bootstrap each tree, grow with `mtry` random candidates per node,
/// then majority-vote each sample over the trees that did not see it.
pub fn naive_oob_error(
    columns: &[Vec<f64>],
    labels: &[u32],
    n_classes: usize,
    cfg: &NaiveConfig,
) -> Result<f64> {
    let n = labels.len();
    if n == 0 || columns.is_empty() {
        return Err(GroveError::Data("reference forest needs data".into()));
    }
    if columns.iter().any(|c| c.len() != n) {
        return Err(GroveError::Data(
            "reference forest columns must match the label count".into(),
        ));
    }
    if cfg.mtry == 0 || cfg.mtry > columns.len() {
        return Err(GroveError::Config(format!(
            "mtry {} outside 1..={}",
            cfg.mtry,
            columns.len()
        )));
    }
    if cfg.num_trees == 0 {
        return Err(GroveError::Config("at least one tree required".into()));
    }

    let mut votes = vec![0u32; n * n_classes];
    for t in 0..cfg.num_trees {
        let mut rng = OracleRng::new(
            cfg.seed
                .wrapping_add((t as u64).wrapping_mul(0xA24B_AED4_963E_E407)),
        );
        let mut inbag = vec![0u32; n];
        let mut members = Vec::with_capacity(n);
        for _ in 0..n {
            let i = rng.below(n);
            inbag[i] += 1;
            members.push(i);
        }
        let tree = grow_naive_tree(columns, labels, members, n_classes, cfg, &mut rng);
        for (i, &count) in inbag.iter().enumerate() {
            if count == 0 {
                let class = predict(&tree, columns, i) as usize;
                votes[i * n_classes + class] += 1;
            }
        }
    }

    let mut wrong = 0usize;
    let mut counted = 0usize;
    for i in 0..n {
        let row = &votes[i * n_classes..(i + 1) * n_classes];
        if row.iter().all(|&v| v == 0) {
            continue;
        }
        let mut winner = 0;
        for (k, &v) in row.iter().enumerate() {
            if v > row[winner] {
                winner = k;
            }
        }
        counted += 1;
        if winner as u32 != labels[i] {
            wrong += 1;
        }
    }
    if counted == 0 {
        return Err(GroveError::NoOob(
            "no sample was left out of every bootstrap".into(),
        ));
    }
    Ok(wrong as f64 / counted as f64)
}
