use serde::{Deserialize, Serialize};

use super::StorageSchedule;

/// Nodal prices at the storage bus; `lmp = −λ1`, `qmp = −λ2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketPrices {
    pub lmp: Vec<f64>,
    pub qmp: Vec<f64>,
}

impl MarketPrices {
    pub fn from_multipliers(lam1: &[f64], lam2: &[f64]) -> Self {
        Self {
            lmp: lam1.iter().map(|x| -x).collect(),
            qmp: lam2.iter().map(|x| -x).collect(),
        }
    }

    pub fn lam1(&self) -> Vec<f64> {
        self.lmp.iter().map(|x| -x).collect()
    }

    pub fn lam2(&self) -> Vec<f64> {
        self.qmp.iter().map(|x| -x).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ProfitMode {
    /// revenue from discharge minus cost of charge: `Σ p_es·λ1 + q_es·λ2 = −Σ p_es·LMP + q_es·QMP`
    #[default]
    Audited,
    /// `Σ p_es·LMP + q_es·QMP`, prices taken at face value with charging positive
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitEvaluation {
    pub profit: f64,
    pub lam1: Vec<f64>,
    pub lam2: Vec<f64>,
    pub schedule: StorageSchedule,
    pub mode: ProfitMode,
}

pub fn step_profit(p_es: f64, q_es: f64, lmp: f64, qmp: f64, mode: ProfitMode) -> f64 {
    let v = p_es * lmp + q_es * qmp;
    match mode {
        ProfitMode::Audited => -v,
        ProfitMode::Literal => v,
    }
}

pub fn evaluate_profit(schedule: &StorageSchedule, prices: &MarketPrices, mode: ProfitMode) -> ProfitEvaluation {
    let profit = (0..schedule.horizon())
        .map(|t| step_profit(schedule.p_es[t], schedule.q_es[t], prices.lmp[t], prices.qmp[t], mode))
        .sum();
    ProfitEvaluation {
        profit,
        lam1: prices.lam1(),
        lam2: prices.lam2(),
        schedule: schedule.clone(),
        mode,
    }
}
