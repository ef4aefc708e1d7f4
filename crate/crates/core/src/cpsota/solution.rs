use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::{solve_conic_with, FamilyCount, SolveResult, SolveStatus, SolverSettings, WarmStart};

use super::{CpsotaError, LlPrimal, StepLayout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalSolution {
    pub th_d: Vec<Vec<f64>>,
    pub v_d: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub pg: Vec<Vec<f64>>,
    pub qg: Vec<Vec<f64>>,
    pub cos_hat: Vec<Vec<f64>>,
    pub v_chk: Vec<Vec<f64>>,
    pub w: Vec<Vec<Option<[f64; 4]>>>,
    pub f: Vec<Vec<Option<[f64; 3]>>>,
    pub objective: f64,
    pub iterations: Vec<usize>,
    pub status: Vec<SolveStatus>,
    /// raw solver output per time step
    #[serde(skip)]
    pub raw: Vec<SolveResult<f64>>,
}

impl PrimalSolution {
    pub fn from_results(layouts: &[&StepLayout], raw: Vec<SolveResult<f64>>) -> Self {
        let pick = |x: &[f64], idx: &[usize]| idx.iter().map(|&k| x[k]).collect::<Vec<f64>>();
        let mut out = PrimalSolution {
            th_d: vec![],
            v_d: vec![],
            p: vec![],
            q: vec![],
            pg: vec![],
            qg: vec![],
            cos_hat: vec![],
            v_chk: vec![],
            w: vec![],
            f: vec![],
            objective: 0.0,
            iterations: vec![],
            status: vec![],
            raw: vec![],
        };
        for (lay, res) in layouts.iter().zip(&raw) {
            let x = &res.x;
            out.th_d.push(pick(x, &lay.th_d));
            out.v_d.push(pick(x, &lay.v_d));
            out.p.push(pick(x, &lay.p));
            out.q.push(pick(x, &lay.q));
            out.pg.push(pick(x, &lay.pg));
            out.qg.push(pick(x, &lay.qg));
            out.cos_hat.push(pick(x, &lay.cos_hat));
            out.v_chk.push(pick(x, &lay.v_chk));
            out.w.push(lay.w.iter().map(|w| w.map(|w| w.map(|k| x[k]))).collect());
            out.f.push(lay.f.iter().map(|f| f.map(|f| f.map(|k| x[k]))).collect());
            out.objective += res.objective;
            out.iterations.push(res.iterations);
            out.status.push(res.status);
        }
        out.raw = raw;
        out
    }

    pub fn max_abs_delta(&self) -> (f64, f64) {
        let m = |v: &[Vec<f64>]| v.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        (m(&self.v_d), m(&self.th_d))
    }

    pub fn warm_starts(&self) -> Vec<WarmStart<f64>> {
        self.raw.iter().map(|r| r.warm.clone()).collect()
    }
}

/// Solves every time step (in parallel) and collects the primal solution.
pub fn solve_ll_primal(
    model: &LlPrimal,
    warm: Option<&[WarmStart<f64>]>,
    settings: &SolverSettings<f64>,
) -> Result<PrimalSolution, CpsotaError> {
    let raw: Vec<SolveResult<f64>> = model
        .steps
        .par_iter()
        .enumerate()
        .map(|(t, step)| {
            let ws = warm.and_then(|w| w.get(t));
            solve_conic_with(&step.program, ws, settings).map_err(|e| CpsotaError::Program(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    if let Some((t, r)) = raw.iter().enumerate().find(|(_, r)| !r.is_optimal()) {
        return Err(CpsotaError::Solve {
            t,
            status: r.status,
            census: model.steps[t].program.census(),
        });
    }
    let layouts: Vec<&StepLayout> = model.steps.iter().map(|s| &s.layout).collect();
    Ok(PrimalSolution::from_results(&layouts, raw))
}

pub type Census = BTreeMap<String, FamilyCount>;
