//! Brute-force split search plus a deterministic case generator, used by
//! test suites to cross-check the production search algorithms. Every
//! partition is re-evaluated from scratch with independently arranged
//! arithmetic, so agreement with the engine is meaningful.

use super::{
    best_split_fixed_levels, best_split_presorted, best_split_sort_on_demand, Criterion,
    SplitResult,
};
use crate::data::{Dataset, FeatureColumn, Response};
use crate::sampling::RngStream;

/// Response data for the brute-force search.
#[derive(Debug, Clone)]
pub enum OracleResponse {
    Classes { labels: Vec<u32>, n_classes: usize },
    Values { values: Vec<f64> },
    Survival { times: Vec<f64>, statuses: Vec<u8> },
}

fn gini_of(members: &[u32], labels: &[u32], n_classes: usize) -> f64 {
    let mut counts = vec![0u64; n_classes];
    for &sid in members {
        counts[labels[sid as usize] as usize] += 1;
    }
    let n = members.len() as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum::<f64>()
}

fn two_pass_variance(members: &[u32], values: &[f64]) -> f64 {
    let n = members.len() as f64;
    let mean = members.iter().map(|&sid| values[sid as usize]).sum::<f64>() / n;
    members
        .iter()
        .map(|&sid| {
            let d = values[sid as usize] - mean;
            d * d
        })
        .sum::<f64>()
        / n
}

fn logrank_recount(
    left: &[u32],
    right: &[u32],
    times: &[f64],
    statuses: &[u8],
) -> Option<f64> {
    let mut event_times: Vec<f64> = left
        .iter()
        .chain(right.iter())
        .filter(|&&sid| statuses[sid as usize] == 1)
        .map(|&sid| times[sid as usize])
        .collect();
    event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    event_times.dedup();

    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for &t in &event_times {
        let count =
            |members: &[u32], pred: &dyn Fn(usize) -> bool| -> f64 {
                members.iter().filter(|&&sid| pred(sid as usize)).count() as f64
            };
        let at_risk_left = count(left, &|sid| times[sid] >= t);
        let at_risk_right = count(right, &|sid| times[sid] >= t);
        let deaths_left = count(left, &|sid| times[sid] == t && statuses[sid] == 1);
        let deaths_right = count(right, &|sid| times[sid] == t && statuses[sid] == 1);
        let at_risk = at_risk_left + at_risk_right;
        let deaths = deaths_left + deaths_right;
        numerator += deaths_left - at_risk_left * deaths / at_risk;
        if at_risk > 1.0 {
            denominator += (at_risk_left / at_risk)
                * (1.0 - at_risk_left / at_risk)
                * ((at_risk - deaths) / (at_risk - 1.0))
                * deaths;
        }
    }
    if denominator > 0.0 {
        Some((numerator.abs()) / denominator.sqrt())
    } else {
        None
    }
}

/// Gain of partitioning `node` by `column[sid] <= threshold`, re-evaluated
/// from scratch, or `None` when a side is empty or the criterion is
/// undefined for the partition.
pub fn brute_force_gain_at(
    column: &[f64],
    node: &[u32],
    response: &OracleResponse,
    threshold: f64,
) -> Option<f64> {
    let (left, right): (Vec<u32>, Vec<u32>) = node
        .iter()
        .partition(|&&sid| column[sid as usize] <= threshold);
    if left.is_empty() || right.is_empty() {
        return None;
    }
    match response {
        OracleResponse::Classes { labels, n_classes } => {
            let parent = gini_of(node, labels, *n_classes);
            let weighted = (left.len() as f64 * gini_of(&left, labels, *n_classes)
                + right.len() as f64 * gini_of(&right, labels, *n_classes))
                / node.len() as f64;
            Some(parent - weighted)
        }
        OracleResponse::Values { values } => {
            let parent = two_pass_variance(node, values);
            let weighted = (left.len() as f64 * two_pass_variance(&left, values)
                + right.len() as f64 * two_pass_variance(&right, values))
                / node.len() as f64;
            Some(parent - weighted)
        }
        OracleResponse::Survival { times, statuses } => {
            logrank_recount(&left, &right, times, statuses)
        }
    }
}

/// Evaluate every boundary between adjacent distinct node values of one
/// feature and return the best (threshold, gain), or `None` when no
/// boundary yields a positive, defined gain. Ties keep the lowest
/// threshold.
pub fn best_split_brute_force(
    column: &[f64],
    node: &[u32],
    response: &OracleResponse,
) -> Option<(f64, f64)> {
    let mut distinct: Vec<f64> = node.iter().map(|&sid| column[sid as usize]).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();

    let mut best: Option<(f64, f64)> = None;
    for pair in distinct.windows(2) {
        let threshold = {
            let mid = (pair[0] + pair[1]) / 2.0;
            if mid >= pair[1] {
                pair[0]
            } else {
                mid
            }
        };
        if let Some(gain) = brute_force_gain_at(column, node, response, threshold) {
            if gain > 0.0 && best.map_or(true, |(_, bg)| gain > bg) {
                best = Some((threshold, gain));
            }
        }
    }
    best
}

/// One generated cross-check case: a single-feature dataset, a node with
/// bootstrap multiplicities, and the criterion matching the response.
pub struct EquivalenceCase {
    pub dataset: Dataset,
    pub node: Vec<u32>,
    pub criterion: Criterion,
    pub column: Vec<f64>,
    pub genotype: bool,
}

/// Deterministically generate a small fuzz case from an index. Cases cycle
/// through the three criteria and alternate between genotype-coded and
/// general-valued columns, with heavy ties in both the feature and the
/// response.
pub fn equivalence_case(case_index: u64) -> EquivalenceCase {
    let mut rng = RngStream::new(0xE0_5EED ^ case_index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let n = 5 + rng.below(56) as usize;
    let genotype = case_index % 2 == 0;
    let column: Vec<f64> = (0..n)
        .map(|_| {
            if genotype {
                rng.below(3) as f64
            } else {
                // a coarse grid keeps duplicate values frequent
                (rng.below(12) as f64) * 0.75 - 3.0
            }
        })
        .collect();

    let criterion = match case_index % 3 {
        0 => Criterion::GiniDecrease,
        1 => Criterion::VarianceDecrease,
        _ => Criterion::LogRank,
    };
    let response = match criterion {
        Criterion::GiniDecrease => {
            let n_classes = 2 + rng.below(3) as usize;
            let labels: Vec<u32> = (0..n).map(|_| rng.below(n_classes as u64) as u32).collect();
            let classes = (0..n_classes).map(|k| format!("c{k}")).collect();
            Response::Classification { labels, classes }
        }
        Criterion::VarianceDecrease => {
            let values = (0..n).map(|_| rng.next_f64() * 10.0).collect();
            Response::Regression { values }
        }
        Criterion::LogRank => {
            let mut times: Vec<f64> = (0..n).map(|_| 1.0 + rng.below(8) as f64).collect();
            let mut statuses: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            // the response type requires at least one observed event
            if statuses.iter().all(|&s| s == 0) {
                statuses[0] = 1;
                times[0] = 1.0 + rng.below(8) as f64;
            }
            Response::Survival { times, statuses }
        }
    };

    let dataset = Dataset::new(
        vec![FeatureColumn::dense("x", column.clone())],
        response,
    )
    .expect("generated dataset is valid");

    let node_size = 2 + rng.below(39) as usize;
    let mut node: Vec<u32> = (0..node_size).map(|_| rng.below(n as u64) as u32).collect();
    node.sort_unstable();

    EquivalenceCase {
        dataset,
        node,
        criterion,
        column,
        genotype,
    }
}

/// Run one generated case through every applicable search algorithm and the
/// brute-force reference. The search algorithms must agree with each other
/// on presence, feature, threshold, and gain (gain to relative tolerance
/// `gain_tol`). Against the brute-force reference the chosen split must
/// achieve the optimal gain within the same tolerance: mathematically tied
/// optima may be ranked differently under differently arranged arithmetic,
/// so an identical threshold is not required. Returns a description of the
/// first mismatch, if any.
pub fn check_equivalence_case(case_index: u64, gain_tol: f64) -> std::result::Result<(), String> {
    let mut case = equivalence_case(case_index);
    let on_demand =
        best_split_sort_on_demand(&case.dataset, &case.node, 0, case.criterion)
            .map_err(|e| format!("case {case_index}: sort-on-demand failed: {e}"))?;

    case.dataset.build_sorted_index();
    let presorted = best_split_presorted(&case.dataset, &case.node, 0, case.criterion)
        .map_err(|e| format!("case {case_index}: presorted failed: {e}"))?;
    compare_results(case_index, "presorted", &on_demand, &presorted, gain_tol)?;

    if case.genotype {
        let dense_levels =
            best_split_fixed_levels(&case.dataset, &case.node, 0, case.criterion)
                .map_err(|e| format!("case {case_index}: fixed-levels failed: {e}"))?;
        compare_results(case_index, "fixed-levels", &on_demand, &dense_levels, gain_tol)?;

        let packed = case.dataset.clone().pack_genotype_columns();
        let packed_levels = best_split_fixed_levels(&packed, &case.node, 0, case.criterion)
            .map_err(|e| format!("case {case_index}: packed fixed-levels failed: {e}"))?;
        compare_results(
            case_index,
            "packed fixed-levels",
            &on_demand,
            &packed_levels,
            gain_tol,
        )?;
    }

    let response = match case.dataset.response() {
        Response::Classification { labels, classes } => OracleResponse::Classes {
            labels: labels.clone(),
            n_classes: classes.len(),
        },
        Response::Regression { values } => OracleResponse::Values {
            values: values.clone(),
        },
        Response::Survival { times, statuses } => OracleResponse::Survival {
            times: times.clone(),
            statuses: statuses.clone(),
        },
    };
    let brute = best_split_brute_force(&case.column, &case.node, &response);
    match (&on_demand, &brute) {
        (None, None) => Ok(()),
        (Some(chosen), None) => {
            if chosen.gain.abs() <= gain_tol {
                Ok(())
            } else {
                Err(format!(
                    "case {case_index}: engine found gain {} where brute force found no positive gain",
                    chosen.gain
                ))
            }
        }
        (None, Some((threshold, gain))) => {
            if *gain <= gain_tol {
                Ok(())
            } else {
                Err(format!(
                    "case {case_index}: engine found no split but brute force gains {gain} at {threshold}"
                ))
            }
        }
        (Some(chosen), Some((best_threshold, best_gain))) => {
            let achieved =
                brute_force_gain_at(&case.column, &case.node, &response, chosen.threshold)
                    .ok_or_else(|| {
                        format!(
                            "case {case_index}: brute force cannot evaluate engine threshold {}",
                            chosen.threshold
                        )
                    })?;
            if !gains_match(achieved, *best_gain, gain_tol) {
                return Err(format!(
                    "case {case_index}: engine threshold {} achieves {achieved} vs brute-force optimum {best_gain} at {best_threshold}",
                    chosen.threshold
                ));
            }
            if !gains_match(chosen.gain, achieved, gain_tol) {
                return Err(format!(
                    "case {case_index}: engine reports gain {} but brute force recounts {achieved} at threshold {}",
                    chosen.gain, chosen.threshold
                ));
            }
            Ok(())
        }
    }
}

fn gains_match(a: f64, b: f64, gain_tol: f64) -> bool {
    (a - b).abs() <= gain_tol * a.abs().max(b.abs()).max(1.0)
}

fn compare_results(
    case_index: u64,
    name: &str,
    expected: &Option<SplitResult>,
    actual: &Option<SplitResult>,
    gain_tol: f64,
) -> std::result::Result<(), String> {
    match (expected, actual) {
        (None, None) => Ok(()),
        (Some(e), Some(a)) => {
            if a.feature != e.feature || a.threshold != e.threshold {
                return Err(format!(
                    "case {case_index}: {name} chose ({}, {}) vs ({}, {})",
                    a.feature, a.threshold, e.feature, e.threshold
                ));
            }
            let scale = e.gain.abs().max(a.gain.abs()).max(f64::MIN_POSITIVE);
            if (a.gain - e.gain).abs() / scale > gain_tol {
                return Err(format!(
                    "case {case_index}: {name} gain {} vs {}",
                    a.gain, e.gain
                ));
            }
            Ok(())
        }
        (e, a) => Err(format!(
            "case {case_index}: {name} presence mismatch: {} vs {}",
            a.is_some(),
            e.is_some()
        )),
    }
}
