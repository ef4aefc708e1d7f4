use serde::{Deserialize, Serialize};

use crate::netcase::StorageUnit;

/// Storage decisions per time step; `p_es = p_ch − p_dis`, positive when charging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageSchedule {
    pub p_es: Vec<f64>,
    pub q_es: Vec<f64>,
    pub p_ch: Vec<f64>,
    pub p_dis: Vec<f64>,
    pub soe: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_p: Option<Vec<bool>>,
}

impl StorageSchedule {
    pub fn passive(horizon: usize, soe_init: f64) -> Self {
        Self {
            p_es: vec![0.0; horizon],
            q_es: vec![0.0; horizon],
            p_ch: vec![0.0; horizon],
            p_dis: vec![0.0; horizon],
            soe: vec![soe_init; horizon],
            x_p: None,
        }
    }

    /// Splits net injections into charge/discharge parts and rolls the energy balance forward.
    pub fn from_net(unit: &StorageUnit, p_es: Vec<f64>, q_es: Vec<f64>) -> Self {
        let p_ch: Vec<f64> = p_es.iter().map(|p| p.max(0.0)).collect();
        let p_dis: Vec<f64> = p_es.iter().map(|p| (-p).max(0.0)).collect();
        let mut soe = Vec::with_capacity(p_es.len());
        let mut e = unit.soe_init;
        for t in 0..p_es.len() {
            e += p_ch[t] * unit.eta_ch - p_dis[t] / unit.eta_dis;
            soe.push(e);
        }
        Self {
            p_es,
            q_es,
            p_ch,
            p_dis,
            soe,
            x_p: None,
        }
    }

    pub fn horizon(&self) -> usize {
        self.p_es.len()
    }

    pub fn is_passive(&self) -> bool {
        self.p_es.iter().chain(&self.q_es).all(|&x| x == 0.0)
    }
}

const FEAS_TOL: f64 = 1e-9;

/// Every violated storage constraint, empty when the schedule is feasible within 1e-9.
pub fn storage_feasible(s: &StorageSchedule, unit: &StorageUnit) -> Vec<String> {
    let mut out = Vec::new();
    let n = s.horizon();
    if [s.q_es.len(), s.p_ch.len(), s.p_dis.len(), s.soe.len()].iter().any(|&l| l != n)
        || s.x_p.as_ref().is_some_and(|x| x.len() != n)
    {
        out.push(format!("schedule vectors differ in length from horizon {n}"));
        return out;
    }
    let mut prev = unit.soe_init;
    for t in 0..n {
        if s.p_ch[t] < -FEAS_TOL || s.p_dis[t] < -FEAS_TOL {
            out.push(format!("t={t}: negative charge or discharge power"));
        }
        if (s.p_es[t] - (s.p_ch[t] - s.p_dis[t])).abs() > FEAS_TOL {
            out.push(format!("t={t}: p_es {} differs from p_ch − p_dis {}", s.p_es[t], s.p_ch[t] - s.p_dis[t]));
        }
        let want = prev + s.p_ch[t] * unit.eta_ch - s.p_dis[t] / unit.eta_dis;
        if (s.soe[t] - want).abs() > FEAS_TOL {
            out.push(format!("t={t}: state of energy {} but the balance gives {want}", s.soe[t]));
        }
        if s.soe[t] < -FEAS_TOL || s.soe[t] > unit.soe_max + FEAS_TOL {
            out.push(format!("t={t}: state of energy {} outside [0, {}]", s.soe[t], unit.soe_max));
        }
        if s.p_es[t].powi(2) + s.q_es[t].powi(2) > unit.s_max.powi(2) + FEAS_TOL {
            out.push(format!("t={t}: apparent power exceeds {}", unit.s_max));
        }
        if let Some(x) = &s.x_p {
            let cap_ch = if x[t] { unit.s_max } else { 0.0 };
            if s.p_ch[t] > cap_ch + FEAS_TOL {
                out.push(format!("t={t}: charging while the charge indicator is off"));
            }
            if s.p_dis[t] > unit.s_max - cap_ch + FEAS_TOL {
                out.push(format!("t={t}: discharging while the charge indicator is on"));
            }
        }
        prev = s.soe[t];
    }
    out
}
