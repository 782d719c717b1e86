//! Survival-specific pieces: the forest-wide time-point grid and the
//! Kaplan-Meier terminal curves.

use crate::split::SurvTable;

/// Ascending distinct event times of the training data; every survival
/// tree's terminal curves are evaluated on this grid.
pub fn forest_timepoints(times: &[f64], statuses: &[u8]) -> Vec<f64> {
    let mut timepoints: Vec<f64> = times
        .iter()
        .zip(statuses)
        .filter(|&(_, &status)| status == 1)
        .map(|(&time, _)| time)
        .collect();
    timepoints.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    timepoints.dedup();
    timepoints
}

/// Kaplan-Meier survival estimate over a terminal node's members (row
/// indices with bootstrap multiplicity), evaluated at each of the given
/// time points. The curve starts at 1 and steps down at the node's own
/// event times.
pub fn terminal_survival_curve(
    times: &[f64],
    statuses: &[u8],
    members: &[u32],
    timepoints: &[f64],
) -> Vec<f64> {
    let mut pairs: Vec<(f64, u8)> = members
        .iter()
        .map(|&sid| (times[sid as usize], statuses[sid as usize]))
        .collect();
    let table = SurvTable::build(&mut pairs);

    let mut survival = 1.0;
    let mut curve = Vec::with_capacity(timepoints.len());
    let mut step = 0;
    for &tp in timepoints {
        while step < table.event_times.len() && table.event_times[step] <= tp {
            survival *= 1.0 - table.d[step] as f64 / table.y[step] as f64;
            step += 1;
        }
        curve.push(survival);
    }
    curve
}
