use crate::netcase::{IndexSets, NetworkCase};

use super::ExactSolution;

/// Φ per time step over arcs (forward then reverse): a branch is flagged on both
/// orientations when either end loads it to `threshold · s_max` or more.
pub fn select_phi_flags(
    flow_p: &[Vec<f64>],
    flow_q: &[Vec<f64>],
    s_max: &[f64],
    threshold: f64,
) -> Vec<Vec<bool>> {
    let m = s_max.len();
    flow_p
        .iter()
        .zip(flow_q)
        .map(|(fp, fq)| {
            let hit: Vec<bool> = (0..m)
                .map(|k| {
                    s_max[k] > 0.0
                        && [k, m + k]
                            .iter()
                            .any(|&a| fp[a].hypot(fq[a]) >= threshold * s_max[k])
                })
                .collect();
            hit.iter().chain(&hit).copied().collect()
        })
        .collect()
}

/// Ratings in forward-arc order.
pub fn branch_ratings(case: &NetworkCase, ix: &IndexSets) -> Vec<f64> {
    ix.forward.iter().map(|a| case.branches[a.branch].s_max).collect()
}

/// Convenience wrapper over an exact solution.
pub fn phi_from_exact(case: &NetworkCase, ix: &IndexSets, exact: &ExactSolution, threshold: f64) -> Vec<Vec<bool>> {
    select_phi_flags(&exact.flow_p, &exact.flow_q, &branch_ratings(case, ix), threshold)
}

/// Largest `|S| / s_max` per forward branch and time step; zero for unrated branches.
pub fn loading_ratios(flow_p: &[Vec<f64>], flow_q: &[Vec<f64>], s_max: &[f64]) -> Vec<Vec<f64>> {
    let m = s_max.len();
    flow_p
        .iter()
        .zip(flow_q)
        .map(|(fp, fq)| {
            (0..m)
                .map(|k| {
                    if s_max[k] > 0.0 {
                        fp[k].hypot(fq[k]).max(fp[m + k].hypot(fq[m + k])) / s_max[k]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}
