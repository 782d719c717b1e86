//! The three split-search algorithms. They differ only in how candidate
//! boundaries are enumerated; accumulation and gain arithmetic are shared
//! through [`NodeKernel`](super::criteria::NodeKernel), so for the same node
//! and feature all three return the same split.

use super::criteria::NodeKernel;
use crate::data::ColumnView;
use crate::error::{GroveError, Result};

/// Best boundary found while scanning one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ScanOutcome {
    pub threshold: f64,
    pub gain: f64,
}

/// Midpoint of two adjacent distinct values. When the midpoint rounds up to
/// the upper value (adjacent floats), the lower value is used instead so
/// that `value <= threshold` still sends the lower run left.
#[inline]
pub(crate) fn split_threshold(lower: f64, upper: f64) -> f64 {
    let mid = (lower + upper) / 2.0;
    if mid >= upper {
        lower
    } else {
        mid
    }
}

/// Streaming boundary scan. Samples must arrive in canonical order:
/// ascending feature value, ties in ascending row order, one push per
/// bootstrap occurrence. A boundary is evaluated each time the value
/// changes, after folding the completed run into the prefix.
struct BoundaryScan<'k, 'a> {
    kernel: &'k mut NodeKernel<'a>,
    run_value: f64,
    has_run: bool,
    best: Option<ScanOutcome>,
}

impl<'k, 'a> BoundaryScan<'k, 'a> {
    fn new(kernel: &'k mut NodeKernel<'a>) -> Self {
        kernel.reset_scan();
        BoundaryScan {
            kernel,
            run_value: 0.0,
            has_run: false,
            best: None,
        }
    }

    #[inline]
    fn push(&mut self, value: f64, sid: u32) {
        if self.has_run {
            if value != self.run_value {
                self.kernel.merge_run_into_prefix();
                consider(
                    &mut self.best,
                    self.kernel.prefix_gain(),
                    split_threshold(self.run_value, value),
                );
                self.run_value = value;
            }
        } else {
            self.has_run = true;
            self.run_value = value;
        }
        self.kernel.add_to_run(sid);
    }

    fn finish(self) -> Option<ScanOutcome> {
        self.best
    }
}

/// Keeps the candidate only on a strictly higher gain, so earlier
/// boundaries win ties; gains must be positive to count.
#[inline]
fn consider(best: &mut Option<ScanOutcome>, gain: Option<f64>, threshold: f64) {
    if let Some(gain) = gain {
        if gain > 0.0 && best.map_or(true, |b| gain > b.gain) {
            *best = Some(ScanOutcome { threshold, gain });
        }
    }
}

/// Sort-on-demand: gather the node's values, stable-sort, scan.
pub(crate) fn search_sort_on_demand(
    column: &ColumnView,
    node: &[u32],
    kernel: &mut NodeKernel,
    scratch: &mut Vec<(f64, u32)>,
) -> Option<ScanOutcome> {
    scratch.clear();
    scratch.extend(node.iter().map(|&sid| (column.value(sid as usize), sid)));
    scratch.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));
    let mut scan = BoundaryScan::new(kernel);
    for &(value, sid) in scratch.iter() {
        scan.push(value, sid);
    }
    scan.finish()
}

/// Presorted: walk the dataset-wide value-sorted permutation of this
/// feature and keep only rows present in the node (`node_counts` holds the
/// node's per-row bootstrap multiplicities). Stops as soon as every node
/// member has been seen.
pub(crate) fn search_presorted(
    column: &ColumnView,
    sorted_rows: &[u32],
    node_counts: &[u32],
    node_size: usize,
    kernel: &mut NodeKernel,
) -> Option<ScanOutcome> {
    let mut scan = BoundaryScan::new(kernel);
    let mut remaining = node_size;
    for &sid in sorted_rows {
        let count = node_counts[sid as usize] as usize;
        if count == 0 {
            continue;
        }
        let value = column.value(sid as usize);
        for _ in 0..count {
            scan.push(value, sid);
        }
        remaining -= count;
        if remaining == 0 {
            break;
        }
    }
    scan.finish()
}

/// Fixed-levels: bucket the node per genotype level {0, 1, 2} in one pass,
/// then evaluate the boundaries between adjacent non-empty levels. The
/// buckets are folded into the prefix with the same merge the streaming
/// scan uses, keeping the arithmetic identical.
pub(crate) fn search_fixed_levels(
    column: &ColumnView,
    node: &[u32],
    kernel: &mut NodeKernel,
) -> Result<Option<ScanOutcome>> {
    let mut buckets = [kernel.new_acc(), kernel.new_acc(), kernel.new_acc()];
    for &sid in node {
        let row = sid as usize;
        let code = match column {
            ColumnView::Packed(packed) => packed.code(row) as usize,
            ColumnView::Dense(values) => {
                let value = values[row];
                if value == 0.0 {
                    0
                } else if value == 1.0 {
                    1
                } else if value == 2.0 {
                    2
                } else {
                    return Err(GroveError::Data(format!(
                        "fixed-level split on non-genotype value {value}"
                    )));
                }
            }
        };
        kernel.add_to_acc(&mut buckets[code], sid);
    }
    kernel.reset_scan();
    let mut best = None;
    let mut prev: Option<(f64, usize)> = None;
    for level in 0..3 {
        if buckets[level].n() == 0 {
            continue;
        }
        let value = level as f64;
        if let Some((prev_value, prev_level)) = prev {
            kernel.merge_acc_into_prefix(&buckets[prev_level]);
            consider(
                &mut best,
                kernel.prefix_gain(),
                split_threshold(prev_value, value),
            );
        }
        prev = Some((value, level));
    }
    Ok(best)
}
