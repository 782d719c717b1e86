//! Split criteria: Gini impurity decrease (classification), variance
//! decrease (regression), and the standardized log-rank statistic
//! (survival), plus the accumulator kernel shared by the three split-search
//! algorithms.
//!
//! All three search algorithms feed samples through the same accumulator
//! and gain arithmetic, in the same canonical order (ascending value, ties
//! by ascending row index, bootstrap duplicates counted per occurrence).
//! Identical arithmetic is what lets the engine mix algorithms freely, and
//! in particular grow bit-identical forests from dense and packed storage.

use crate::data::Response;
use crate::error::{GroveError, Result};

/// Split criterion selector; must match the response type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    GiniDecrease,
    VarianceDecrease,
    LogRank,
}

impl Criterion {
    /// Criterion used to grow a tree on the given response.
    pub fn for_response(response: &Response) -> Criterion {
        match response {
            Response::Classification { .. } => Criterion::GiniDecrease,
            Response::Regression { .. } => Criterion::VarianceDecrease,
            Response::Survival { .. } => Criterion::LogRank,
        }
    }
}

fn gini_impurity_of(counts: &[u64], n: u64) -> f64 {
    let n = n as f64;
    let mut sum = 0.0;
    for &c in counts {
        let p = c as f64 / n;
        sum += p * p;
    }
    1.0 - sum
}

/// Gini impurity 1 - sum_k (count_k / N)^2.
pub fn gini_impurity(class_counts: &[u64]) -> Result<f64> {
    let n: u64 = class_counts.iter().sum();
    if n == 0 {
        return Err(GroveError::Data(
            "gini impurity of an empty node is undefined".into(),
        ));
    }
    Ok(gini_impurity_of(class_counts, n))
}

fn gini_gain(parent: &[u64], parent_impurity: f64, n: u64, left: &[u64], n_left: u64) -> f64 {
    let n_right = n - n_left;
    let nl = n_left as f64;
    let nr = n_right as f64;
    let nf = n as f64;
    let mut left_sum = 0.0;
    let mut right_sum = 0.0;
    for (k, &lc) in left.iter().enumerate() {
        let pl = lc as f64 / nl;
        let pr = (parent[k] - lc) as f64 / nr;
        left_sum += pl * pl;
        right_sum += pr * pr;
    }
    parent_impurity - (nl / nf) * (1.0 - left_sum) - (nr / nf) * (1.0 - right_sum)
}

/// Impurity decrease imp(parent) - (N_L/N) imp(left) - (N_R/N) imp(right).
pub fn gini_decrease(parent: &[u64], left: &[u64], right: &[u64]) -> Result<f64> {
    if parent.len() != left.len() || parent.len() != right.len() {
        return Err(GroveError::Data("class count lengths differ".into()));
    }
    for k in 0..parent.len() {
        if left[k] + right[k] != parent[k] {
            return Err(GroveError::Data(format!(
                "children counts do not partition the parent at class {k}"
            )));
        }
    }
    let n: u64 = parent.iter().sum();
    let n_left: u64 = left.iter().sum();
    if n_left == 0 || n_left == n {
        return Err(GroveError::Data("both children must be non-empty".into()));
    }
    let parent_impurity = gini_impurity_of(parent, n);
    Ok(gini_gain(parent, parent_impurity, n, left, n_left))
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sumsq: f64,
}

impl Moments {
    fn from_values(values: &[f64]) -> Moments {
        let mut m = Moments::default();
        for &v in values {
            m.add(v);
        }
        m
    }

    #[inline]
    fn add(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sumsq += v * v;
    }

    /// Population variance (single-pass form, node count as denominator).
    fn variance(&self) -> f64 {
        let n = self.n as f64;
        let mean = self.sum / n;
        self.sumsq / n - mean * mean
    }
}

fn variance_gain(parent: &Moments, parent_variance: f64, left: &Moments) -> f64 {
    let right = Moments {
        n: parent.n - left.n,
        sum: parent.sum - left.sum,
        sumsq: parent.sumsq - left.sumsq,
    };
    let nf = parent.n as f64;
    parent_variance
        - (left.n as f64 / nf) * left.variance()
        - (right.n as f64 / nf) * right.variance()
}

/// Variance decrease Var(parent) - (N_L/N) Var(L) - (N_R/N) Var(R), with
/// population variances.
pub fn variance_decrease(parent: &[f64], left: &[f64], right: &[f64]) -> Result<f64> {
    if left.len() + right.len() != parent.len() {
        return Err(GroveError::Data(
            "children sizes do not partition the parent".into(),
        ));
    }
    if left.is_empty() || right.is_empty() {
        return Err(GroveError::Data("both children must be non-empty".into()));
    }
    let pm = Moments::from_values(parent);
    let lm = Moments::from_values(left);
    Ok(variance_gain(&pm, pm.variance(), &lm))
}

/// Per-event-time tabulation for one node: ascending distinct event times,
/// event counts `d`, and at-risk counts `y`.
#[derive(Debug, Clone)]
pub(crate) struct SurvTable {
    pub event_times: Vec<f64>,
    pub d: Vec<u32>,
    pub y: Vec<u32>,
}

impl SurvTable {
    pub fn build(pairs: &mut Vec<(f64, u8)>) -> SurvTable {
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
        let total = pairs.len();
        let mut table = SurvTable {
            event_times: Vec::new(),
            d: Vec::new(),
            y: Vec::new(),
        };
        let mut pos = 0;
        while pos < total {
            let t = pairs[pos].0;
            let mut end = pos;
            let mut events = 0u32;
            while end < total && pairs[end].0 == t {
                if pairs[end].1 == 1 {
                    events += 1;
                }
                end += 1;
            }
            if events > 0 {
                table.event_times.push(t);
                table.d.push(events);
                table.y.push((total - pos) as u32);
            }
            pos = end;
        }
        table
    }
}

/// Standardized log-rank value from per-event-time tables: the numerator
/// sums observed-minus-expected events in the left child; the denominator
/// is the square root of the hypergeometric variance sum, with terms
/// dropped when fewer than two subjects remain at risk.
pub(crate) fn logrank_from_tables(
    d: &[u32],
    y: &[u32],
    d_left: &[u32],
    y_left: &[u32],
) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..d.len() {
        let di = d[i] as f64;
        let yi = y[i] as f64;
        let dli = d_left[i] as f64;
        let yli = y_left[i] as f64;
        num += dli - yli * di / yi;
        if y[i] > 1 {
            den += (yli / yi) * (1.0 - yli / yi) * ((yi - di) / (yi - 1.0)) * di;
        }
    }
    if den > 0.0 {
        Some((num / den.sqrt()).abs())
    } else {
        None
    }
}

/// Absolute standardized log-rank statistic between two children, each
/// given as (times, statuses). Returns `None` when the variance term is
/// zero (no usable event times), which callers treat as an absent split
/// candidate.
pub fn logrank_statistic(left: (&[f64], &[u8]), right: (&[f64], &[u8])) -> Option<f64> {
    let mut pooled: Vec<(f64, u8)> = Vec::with_capacity(left.0.len() + right.0.len());
    pooled.extend(left.0.iter().copied().zip(left.1.iter().copied()));
    pooled.extend(right.0.iter().copied().zip(right.1.iter().copied()));
    let table = SurvTable::build(&mut pooled);
    let t = table.event_times.len();
    let mut d_left = vec![0u32; t];
    let mut y_left = vec![0u32; t];
    for (&time, &status) in left.0.iter().zip(left.1.iter()) {
        for i in 0..t {
            if table.event_times[i] <= time {
                y_left[i] += 1;
            }
            if status == 1 && table.event_times[i] == time {
                d_left[i] += 1;
            }
        }
    }
    logrank_from_tables(&table.d, &table.y, &d_left, &y_left)
}

/// Sufficient statistics accumulated over a prefix of node samples.
#[derive(Debug, Clone)]
pub(crate) enum Acc {
    Counts { n: u64, counts: Vec<u64> },
    Moments(Moments),
    /// `d`: events per node event time; `ge`: samples bucketed by the last
    /// event-time index they are at risk for (suffix-summed to at-risk
    /// counts at evaluation).
    Surv { n: u64, d: Vec<u32>, ge: Vec<u32> },
}

impl Acc {
    pub fn n(&self) -> u64 {
        match self {
            Acc::Counts { n, .. } => *n,
            Acc::Moments(m) => m.n,
            Acc::Surv { n, .. } => *n,
        }
    }

    fn clear(&mut self) {
        match self {
            Acc::Counts { n, counts } => {
                *n = 0;
                counts.fill(0);
            }
            Acc::Moments(m) => *m = Moments::default(),
            Acc::Surv { n, d, ge } => {
                *n = 0;
                d.fill(0);
                ge.fill(0);
            }
        }
    }

    fn merge(&mut self, other: &Acc) {
        match (self, other) {
            (Acc::Counts { n, counts }, Acc::Counts { n: on, counts: oc }) => {
                *n += on;
                for (a, b) in counts.iter_mut().zip(oc) {
                    *a += b;
                }
            }
            (Acc::Moments(m), Acc::Moments(o)) => {
                m.n += o.n;
                m.sum += o.sum;
                m.sumsq += o.sumsq;
            }
            (Acc::Surv { n, d, ge }, Acc::Surv { n: on, d: od, ge: og }) => {
                *n += on;
                for (a, b) in d.iter_mut().zip(od) {
                    *a += b;
                }
                for (a, b) in ge.iter_mut().zip(og) {
                    *a += b;
                }
            }
            _ => unreachable!("mismatched accumulator kinds"),
        }
    }
}

/// Response access for one node's split search.
#[derive(Debug, Clone, Copy)]
pub(crate) enum ResponseView<'a> {
    Classes { labels: &'a [u32], n_classes: usize },
    Values { values: &'a [f64] },
    Survival { times: &'a [f64], statuses: &'a [u8] },
}

impl<'a> ResponseView<'a> {
    pub fn for_criterion(criterion: Criterion, response: &'a Response) -> Result<Self> {
        match (criterion, response) {
            (Criterion::GiniDecrease, Response::Classification { labels, classes }) => {
                Ok(ResponseView::Classes {
                    labels,
                    n_classes: classes.len(),
                })
            }
            (Criterion::VarianceDecrease, Response::Regression { values }) => {
                Ok(ResponseView::Values { values })
            }
            (Criterion::LogRank, Response::Survival { times, statuses }) => {
                Ok(ResponseView::Survival { times, statuses })
            }
            _ => Err(GroveError::Config(
                "split criterion does not match the response type".into(),
            )),
        }
    }
}

fn acc_add(resp: &ResponseView, surv: Option<&SurvTable>, acc: &mut Acc, sid: u32) {
    match (resp, acc) {
        (ResponseView::Classes { labels, .. }, Acc::Counts { n, counts }) => {
            *n += 1;
            counts[labels[sid as usize] as usize] += 1;
        }
        (ResponseView::Values { values }, Acc::Moments(m)) => {
            m.add(values[sid as usize]);
        }
        (ResponseView::Survival { times, statuses }, Acc::Surv { n, d, ge }) => {
            *n += 1;
            let table = surv.expect("survival table built with the kernel");
            let time = times[sid as usize];
            let k = table.event_times.partition_point(|&t| t <= time);
            if k > 0 {
                ge[k - 1] += 1;
                if statuses[sid as usize] == 1 && table.event_times[k - 1] == time {
                    d[k - 1] += 1;
                }
            }
        }
        _ => unreachable!("mismatched response and accumulator"),
    }
}

/// Per-node split-search state: parent statistics plus reusable prefix/run
/// accumulators. One kernel serves every candidate feature of the node.
pub(crate) struct NodeKernel<'a> {
    resp: ResponseView<'a>,
    surv: Option<SurvTable>,
    parent: Acc,
    parent_impurity: f64,
    node_size: u64,
    prefix: Acc,
    run: Acc,
    y_left_scratch: Vec<u32>,
}

impl<'a> NodeKernel<'a> {
    pub fn new(resp: ResponseView<'a>, node: &[u32]) -> NodeKernel<'a> {
        let surv = match resp {
            ResponseView::Survival { times, statuses } => {
                let mut pairs: Vec<(f64, u8)> = node
                    .iter()
                    .map(|&i| (times[i as usize], statuses[i as usize]))
                    .collect();
                Some(SurvTable::build(&mut pairs))
            }
            _ => None,
        };
        let empty = match resp {
            ResponseView::Classes { n_classes, .. } => Acc::Counts {
                n: 0,
                counts: vec![0; n_classes],
            },
            ResponseView::Values { .. } => Acc::Moments(Moments::default()),
            ResponseView::Survival { .. } => {
                let t = surv.as_ref().unwrap().event_times.len();
                Acc::Surv {
                    n: 0,
                    d: vec![0; t],
                    ge: vec![0; t],
                }
            }
        };
        let mut parent = empty.clone();
        for &sid in node {
            acc_add(&resp, surv.as_ref(), &mut parent, sid);
        }
        let parent_impurity = match &parent {
            Acc::Counts { n, counts } => gini_impurity_of(counts, *n),
            Acc::Moments(m) => m.variance(),
            Acc::Surv { .. } => 0.0,
        };
        let t = surv.as_ref().map_or(0, |s| s.event_times.len());
        NodeKernel {
            resp,
            surv,
            parent,
            parent_impurity,
            node_size: node.len() as u64,
            prefix: empty.clone(),
            run: empty,
            y_left_scratch: vec![0; t],
        }
    }

    pub fn new_acc(&self) -> Acc {
        let mut acc = self.prefix.clone();
        acc.clear();
        acc
    }

    pub fn reset_scan(&mut self) {
        self.prefix.clear();
        self.run.clear();
    }

    #[inline]
    pub fn add_to_run(&mut self, sid: u32) {
        acc_add(&self.resp, self.surv.as_ref(), &mut self.run, sid);
    }

    #[inline]
    pub fn add_to_acc(&self, acc: &mut Acc, sid: u32) {
        acc_add(&self.resp, self.surv.as_ref(), acc, sid);
    }

    pub fn merge_run_into_prefix(&mut self) {
        self.prefix.merge(&self.run);
        self.run.clear();
    }

    pub fn merge_acc_into_prefix(&mut self, acc: &Acc) {
        self.prefix.merge(acc);
    }

    /// Gain of the split sending the current prefix left and the rest
    /// right. `None` when the criterion yields no usable value.
    pub fn prefix_gain(&mut self) -> Option<f64> {
        let n_left = self.prefix.n();
        debug_assert!(n_left > 0 && n_left < self.node_size);
        match (&self.parent, &self.prefix) {
            (Acc::Counts { n, counts }, Acc::Counts { counts: left, n: nl }) => {
                Some(gini_gain(counts, self.parent_impurity, *n, left, *nl))
            }
            (Acc::Moments(pm), Acc::Moments(lm)) => {
                Some(variance_gain(pm, self.parent_impurity, lm))
            }
            (Acc::Surv { .. }, Acc::Surv { d: d_left, ge, .. }) => {
                let table = self.surv.as_ref().expect("survival table");
                let y_left = &mut self.y_left_scratch;
                let mut suffix = 0u32;
                for i in (0..ge.len()).rev() {
                    suffix += ge[i];
                    y_left[i] = suffix;
                }
                logrank_from_tables(&table.d, &table.y, d_left, y_left)
            }
            _ => unreachable!(),
        }
    }

    /// True when no split of this node can produce a positive gain without
    /// even scanning: single-class, constant-response, or event-free nodes.
    pub fn node_is_pure(&self) -> bool {
        match &self.parent {
            Acc::Counts { n, counts } => counts.iter().any(|&c| c == *n),
            Acc::Moments(m) => m.variance() <= 0.0,
            Acc::Surv { d, .. } => d.iter().all(|&e| e == 0),
        }
    }
}
