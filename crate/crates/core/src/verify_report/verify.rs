use serde::{Deserialize, Serialize};

use crate::bilevel::{evaluate_profit, MarketPrices, ProfitMode, StorageSchedule};
use crate::netcase::{IndexSets, NetworkCase};
use crate::pfexact::{branch_ratings, loading_ratios, solve_exact_polar_opf, ExactSolution, OpfError, OpfSettings};

/// Step 6 output: the exact model re-solved with the storage schedule fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub exact_cost: f64,
    pub cost_per_step: Vec<f64>,
    /// prices at the storage bus
    pub prices: MarketPrices,
    pub exact_profit: f64,
    /// `[t][branch]` largest end loading relative to the rating
    pub loading: Vec<Vec<f64>>,
}

/// Pure function of the case and schedule; also hands back the exact solution.
pub fn verify_solution(
    case: &NetworkCase,
    schedule: &StorageSchedule,
    mode: ProfitMode,
    settings: &OpfSettings,
) -> Result<(Verification, ExactSolution), OpfError> {
    let ix = IndexSets::build(case);
    let beta = ix
        .storage_bus
        .ok_or_else(|| OpfError::Case("case has no storage unit".into()))?;
    let exact = solve_exact_polar_opf(case, Some(schedule), settings)?;
    let prices = MarketPrices {
        lmp: exact.price_p.iter().map(|r| r[beta]).collect(),
        qmp: exact.price_q.iter().map(|r| r[beta]).collect(),
    };
    let exact_profit = evaluate_profit(schedule, &prices, mode).profit;
    let loading = loading_ratios(&exact.flow_p, &exact.flow_q, &branch_ratings(case, &ix));
    let record = Verification {
        exact_cost: exact.objective,
        cost_per_step: exact.cost.clone(),
        prices,
        exact_profit,
        loading,
    };
    Ok((record, exact))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitComparison {
    /// from the lower-level dual prices
    pub predicted: f64,
    /// from the exact balance marginals
    pub exact: f64,
    pub gap: f64,
    /// `gap / max(|exact|, 1e-9)`
    pub relative_gap: f64,
}

impl ProfitComparison {
    pub fn new(predicted: f64, exact: f64) -> Self {
        let gap = predicted - exact;
        Self {
            predicted,
            exact,
            gap,
            relative_gap: gap.abs() / exact.abs().max(1e-9),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overload {
    pub iteration: usize,
    pub t: usize,
    pub branch: usize,
    pub ratio: f64,
}

/// Branches loaded beyond their rating whose limit was not imposed (Φ false on both arcs).
pub fn find_overloads(
    iteration: usize,
    case: &NetworkCase,
    ix: &IndexSets,
    loading: &[Vec<f64>],
    phi: &[Vec<bool>],
) -> Vec<Overload> {
    let m = ix.forward.len();
    let mut out = Vec::new();
    for (t, row) in loading.iter().enumerate() {
        for (k, &ratio) in row.iter().enumerate() {
            if ratio > 1.0 + 1e-9 && !phi[t][k] && !phi[t][m + k] {
                out.push(Overload {
                    iteration,
                    t,
                    branch: case.branches[ix.forward[k].branch].id,
                    ratio,
                });
            }
        }
    }
    out
}

/// Lowered Φ threshold for a re-run: below half the current one and below the
/// operating-point loading of every overloaded branch, never under 0.05.
pub fn rerun_threshold(threshold: f64, overloaded_op_loading: &[f64]) -> f64 {
    let lowest = overloaded_op_loading.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    (0.5 * threshold).min(0.99 * lowest).max(0.05)
}
