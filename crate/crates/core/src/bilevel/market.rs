use serde::{Deserialize, Serialize};

use crate::conic::{solve_conic_with, SolverSettings, WarmStart};
use crate::cpsota::{build_ll_primal_step, DerivedCoeffs, PresolveFlags};
use crate::dualmodel::{build_ll_dual_step, relative_gap, DualOptions, DualSolution};
use crate::netcase::{IndexSets, NetworkCase};
use crate::pfexact::OperatingPoint;

use super::StorageSchedule;

/// Outcome of clearing one time step with a fixed storage injection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepClearing {
    pub lmp: f64,
    pub qmp: f64,
    /// lower-level primal objective
    pub cost: f64,
    pub gap: f64,
}

/// A lower level whose time steps clear independently once the storage schedule is fixed.
pub trait MarketClearing: Sync {
    fn horizon(&self) -> usize;
    fn clear_step(&self, t: usize, p_es: f64, q_es: f64) -> Result<StepClearing, String>;
}

/// CPSOTA primal and explicit dual around a fixed operating point and flag set.
pub struct CpsotaMarket<'a> {
    pub case: &'a NetworkCase,
    pub ix: &'a IndexSets,
    pub op: &'a OperatingPoint,
    pub coeffs: &'a DerivedCoeffs,
    pub flags: &'a PresolveFlags,
    pub settings: SolverSettings<f64>,
    pub primal_warm: Option<&'a [WarmStart<f64>]>,
    pub dual_warm: Option<&'a [WarmStart<f64>]>,
}

impl CpsotaMarket<'_> {
    fn schedule_at(&self, t: usize, p_es: f64, q_es: f64) -> StorageSchedule {
        let n = self.case.horizon;
        let mut s = StorageSchedule::passive(n, 0.0);
        s.p_es[t] = p_es;
        s.q_es[t] = q_es;
        s
    }
}

impl MarketClearing for CpsotaMarket<'_> {
    fn horizon(&self) -> usize {
        self.case.horizon
    }

    fn clear_step(&self, t: usize, p_es: f64, q_es: f64) -> Result<StepClearing, String> {
        let beta = self.ix.storage_bus.ok_or("case has no storage unit")?;
        let s = self.schedule_at(t, p_es, q_es);
        let ps = build_ll_primal_step(self.case, self.ix, self.op, self.coeffs, self.flags, Some(&s), t)
            .map_err(|e| e.to_string())?;
        let ds = build_ll_dual_step(
            self.case,
            self.ix,
            self.op,
            self.coeffs,
            self.flags,
            Some(&s),
            &DualOptions::default(),
            t,
        )
        .map_err(|e| e.to_string())?;
        let (pw, dw) = rayon::join(
            || solve_conic_with(&ps.program, self.primal_warm.and_then(|w| w.get(t)), &self.settings),
            || solve_conic_with(&ds.program, self.dual_warm.and_then(|w| w.get(t)), &self.settings),
        );
        let pr = pw.map_err(|e| e.to_string())?;
        let dr = dw.map_err(|e| e.to_string())?;
        if !pr.is_optimal() || !dr.is_optimal() {
            return Err(format!("t={t}: primal {:?}, dual {:?}", pr.status, dr.status));
        }
        let lam1 = dr.x[ds.layout.lam1[beta]];
        let lam2 = dr.x[ds.layout.lam2[beta]];
        Ok(StepClearing {
            lmp: -lam1,
            qmp: -lam2,
            cost: pr.objective,
            gap: relative_gap(pr.objective, -dr.objective),
        })
    }
}

/// Prices at `beta` read from a full dual solution.
pub fn prices_at(dual: &DualSolution, beta: usize) -> super::MarketPrices {
    let lam1: Vec<f64> = dual.lam1.iter().map(|r| r[beta]).collect();
    let lam2: Vec<f64> = dual.lam2.iter().map(|r| r[beta]).collect();
    super::MarketPrices::from_multipliers(&lam1, &lam2)
}
