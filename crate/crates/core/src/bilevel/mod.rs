//! Upper-level storage model and the discretized bilevel search.

mod market;
mod profit;
mod schedule;
mod search;
mod smoothing;

pub use market::{prices_at, CpsotaMarket, MarketClearing, StepClearing};
pub use profit::{evaluate_profit, step_profit, MarketPrices, ProfitEvaluation, ProfitMode};
pub use schedule::{storage_feasible, StorageSchedule};
pub use search::{
    candidate_grid, discretized_bilevel_search, exhaustive_search, symmetric_grid, ClearingCache, SearchConfig,
    SearchOutcome, TraceEntry,
};
pub use smoothing::{smoothed_complementarity, smoothed_complementarity_grad};
