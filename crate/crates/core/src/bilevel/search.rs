use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::netcase::StorageUnit;

use super::{
    step_profit, storage_feasible, MarketClearing, MarketPrices, ProfitEvaluation, ProfitMode, StepClearing,
    StorageSchedule,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// active-power grid size; the grid always contains 0
    pub grid_points: usize,
    /// 1 searches q_es = 0 only, 3 adds ±s_max
    pub q_points: usize,
    pub profit_tol: f64,
    pub max_sweeps: usize,
    pub mode: ProfitMode,
    /// largest grid product enumerated to detect a local optimum
    pub exhaustive_limit: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_points: 7,
            q_points: 1,
            profit_tol: 1e-6,
            max_sweeps: 20,
            mode: ProfitMode::Audited,
            exhaustive_limit: 4096,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.grid_points == 0 {
            return Err("grid_points must be at least 1".into());
        }
        if self.q_points != 1 && self.q_points != 3 {
            return Err("q_points must be 1 or 3".into());
        }
        if !(self.profit_tol > 0.0) || self.max_sweeps == 0 {
            return Err("profit_tol and max_sweeps must be positive".into());
        }
        Ok(())
    }
}

/// `n` evenly spaced points over `[−s, s]`, plus 0 when `n` is even.
pub fn symmetric_grid(n: usize, s: f64) -> Vec<f64> {
    let mut g: Vec<f64> = if n == 1 {
        vec![0.0]
    } else {
        (0..n).map(|k| -s + 2.0 * s * k as f64 / (n - 1) as f64).collect()
    };
    if n % 2 == 1 {
        g[n / 2] = 0.0;
    } else {
        g.push(0.0);
        g.sort_by(f64::total_cmp);
    }
    g
}

/// Candidate `(p_es, q_es)` pairs inside the apparent-power disc.
pub fn candidate_grid(unit: &StorageUnit, cfg: &SearchConfig) -> Vec<(f64, f64)> {
    let ps = symmetric_grid(cfg.grid_points, unit.s_max);
    let qs = symmetric_grid(cfg.q_points, unit.s_max);
    let mut out = Vec::new();
    for &p in &ps {
        for &q in &qs {
            if p * p + q * q <= unit.s_max * unit.s_max * (1.0 + 1e-12) {
                out.push((p, q));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub sweep: usize,
    pub t: usize,
    pub candidate: usize,
    pub p_es: f64,
    pub q_es: f64,
    /// schedule profit with this candidate; `None` when skipped
    pub profit: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub evaluation: ProfitEvaluation,
    pub clearing: Vec<StepClearing>,
    pub trace: Vec<TraceEntry>,
    /// best profit after each sweep
    pub sweep_best: Vec<f64>,
    /// exhaustive optimum minus the search result, when the grid product was small enough
    pub local_optimum_gap: Option<f64>,
    pub evaluations: usize,
}

impl SearchOutcome {
    pub fn schedule(&self) -> &StorageSchedule {
        &self.evaluation.schedule
    }

    pub fn write_trace_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["sweep", "t", "candidate", "p_es", "q_es", "profit", "accepted"])?;
        for e in &self.trace {
            w.write_record([
                e.sweep.to_string(),
                e.t.to_string(),
                e.candidate.to_string(),
                e.p_es.to_string(),
                e.q_es.to_string(),
                e.profit.map_or(String::new(), |p| p.to_string()),
                e.accepted.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Memoized per-step clearings keyed by `(t, candidate)`.
pub struct ClearingCache<'a, M: MarketClearing> {
    market: &'a M,
    cands: Vec<(f64, f64)>,
    memo: Mutex<BTreeMap<(usize, usize), Option<StepClearing>>>,
}

impl<'a, M: MarketClearing> ClearingCache<'a, M> {
    pub fn new(market: &'a M, cands: Vec<(f64, f64)>) -> Self {
        Self {
            market,
            cands,
            memo: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn candidates(&self) -> &[(f64, f64)] {
        &self.cands
    }

    pub fn len(&self) -> usize {
        self.memo.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Clears every uncached candidate of step `t` in parallel.
    pub fn fill(&self, t: usize) {
        let todo: Vec<usize> = {
            let m = self.memo.lock().unwrap();
            (0..self.cands.len()).filter(|c| !m.contains_key(&(t, *c))).collect()
        };
        let got: Vec<(usize, Option<StepClearing>)> = todo
            .par_iter()
            .map(|&c| {
                let (p, q) = self.cands[c];
                let r = self.market.clear_step(t, p, q);
                if let Err(e) = &r {
                    warn!("candidate ({p}, {q}) at t={t} skipped: {e}");
                }
                (c, r.ok())
            })
            .collect();
        let mut m = self.memo.lock().unwrap();
        for (c, r) in got {
            m.insert((t, c), r);
        }
    }

    pub fn get(&self, t: usize, c: usize) -> Option<StepClearing> {
        if let Some(r) = self.memo.lock().unwrap().get(&(t, c)) {
            return *r;
        }
        let (p, q) = self.cands[c];
        let r = self.market.clear_step(t, p, q).ok();
        self.memo.lock().unwrap().insert((t, c), r);
        r
    }
}

fn schedule_of(unit: &StorageUnit, cands: &[(f64, f64)], pick: &[usize]) -> StorageSchedule {
    let p = pick.iter().map(|&c| cands[c].0).collect();
    let q = pick.iter().map(|&c| cands[c].1).collect();
    StorageSchedule::from_net(unit, p, q)
}

fn contribution(cache: &ClearingCache<impl MarketClearing>, t: usize, c: usize, mode: ProfitMode) -> Option<f64> {
    let (p, q) = cache.cands[c];
    cache.get(t, c).map(|r| step_profit(p, q, r.lmp, r.qmp, mode))
}

/// Schedule profit, `None` when infeasible or a step failed to clear.
fn schedule_profit(
    cache: &ClearingCache<impl MarketClearing>,
    unit: &StorageUnit,
    pick: &[usize],
    mode: ProfitMode,
) -> Option<f64> {
    if !storage_feasible(&schedule_of(unit, &cache.cands, pick), unit).is_empty() {
        return None;
    }
    pick.iter().enumerate().map(|(t, &c)| contribution(cache, t, c, mode)).sum()
}

/// Exhaustive enumeration over the grid product; `None` when it exceeds `limit`.
pub fn exhaustive_search<M: MarketClearing>(
    cache: &ClearingCache<M>,
    unit: &StorageUnit,
    mode: ProfitMode,
    limit: usize,
) -> Option<(Vec<usize>, f64)> {
    let n = cache.market.horizon();
    let k = cache.cands.len();
    let total = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(k).filter(|&v| v <= limit))?;
    for t in 0..n {
        cache.fill(t);
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut pick = vec![0usize; n];
    for idx in 0..total {
        let mut r = idx;
        for p in pick.iter_mut().rev() {
            *p = r % k;
            r /= k;
        }
        if let Some(v) = schedule_profit(cache, unit, &pick, mode) {
            if best.as_ref().is_none_or(|b| v > b.1) {
                best = Some((pick.clone(), v));
            }
        }
    }
    best
}

/// Coordinate descent over time steps from the passive schedule.
pub fn discretized_bilevel_search<M: MarketClearing>(
    market: &M,
    unit: &StorageUnit,
    cfg: &SearchConfig,
) -> Result<SearchOutcome, String> {
    cfg.validate()?;
    let n = market.horizon();
    let cands = candidate_grid(unit, cfg);
    let zero = cands.iter().position(|&(p, q)| p == 0.0 && q == 0.0).expect("grid contains 0");
    let cache = ClearingCache::new(market, cands);
    let mut pick = vec![zero; n];
    let mut best = schedule_profit(&cache, unit, &pick, cfg.mode)
        .ok_or("the passive schedule could not be cleared")?;
    let mut trace = Vec::new();
    let mut sweep_best = Vec::new();
    for sweep in 1..=cfg.max_sweeps {
        let mut moved = false;
        for t in 0..n {
            cache.fill(t);
            let mut top: Option<(usize, f64)> = None;
            let start = trace.len();
            for c in 0..cache.cands.len() {
                let mut trial = pick.clone();
                trial[t] = c;
                let v = schedule_profit(&cache, unit, &trial, cfg.mode);
                trace.push(TraceEntry {
                    sweep,
                    t,
                    candidate: c,
                    p_es: cache.cands[c].0,
                    q_es: cache.cands[c].1,
                    profit: v,
                    accepted: false,
                });
                if let Some(v) = v {
                    if c != pick[t] && top.is_none_or(|(_, b)| v > b) {
                        top = Some((c, v));
                    }
                }
            }
            if let Some((c, v)) = top {
                if v > best + cfg.profit_tol {
                    pick[t] = c;
                    best = v;
                    moved = true;
                    trace[start + c].accepted = true;
                }
            }
        }
        sweep_best.push(best);
        if !moved {
            break;
        }
    }
    let local_optimum_gap =
        exhaustive_search(&cache, unit, cfg.mode, cfg.exhaustive_limit).map(|(_, v)| (v - best).max(0.0));
    if let Some(g) = local_optimum_gap.filter(|&g| g > cfg.profit_tol) {
        warn!("coordinate descent stopped {g:.3e} below the exhaustive optimum");
    }
    let schedule = schedule_of(unit, &cache.cands, &pick);
    let clearing: Vec<StepClearing> = pick
        .iter()
        .enumerate()
        .map(|(t, &c)| cache.get(t, c).expect("accepted candidates cleared"))
        .collect();
    let prices = MarketPrices {
        lmp: clearing.iter().map(|c| c.lmp).collect(),
        qmp: clearing.iter().map(|c| c.qmp).collect(),
    };
    let evaluation = super::evaluate_profit(&schedule, &prices, cfg.mode);
    Ok(SearchOutcome {
        evaluation,
        clearing,
        trace,
        sweep_best,
        local_optimum_gap,
        evaluations: cache.len(),
    })
}
