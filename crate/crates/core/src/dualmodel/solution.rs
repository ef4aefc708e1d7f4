use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::{solve_conic_with, SolveResult, SolveStatus, SolverSettings, WarmStart};
use crate::cpsota::{LlPrimal, PrimalSolution};
use crate::netcase::{IndexSets, NetworkCase};
use crate::pfexact::OperatingPoint;

use super::{BoxDual, DualError, DualLayout, DualStep, LlDual};

/// Lower-level multipliers; outer index is the time step, conditional families hold `None`
/// where their flag is off.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DualSolution {
    pub lam1: Vec<Vec<f64>>,
    pub lam2: Vec<Vec<f64>>,
    /// `λ3` then `λ4`, ordered like the arcs
    pub lam_p: Vec<Vec<f64>>,
    /// `λ5` then `λ6`
    pub lam_q: Vec<Vec<f64>>,
    pub lam7: Vec<Vec<Option<f64>>>,
    pub lam8: Vec<Vec<Option<f64>>>,
    pub lam9: Vec<Vec<Option<f64>>>,
    pub mu1: Vec<Vec<Option<f64>>>,
    pub lam10: Vec<Vec<Option<f64>>>,
    pub lam11: Vec<Vec<Option<f64>>>,
    pub lam12: Vec<Vec<Option<f64>>>,
    pub mu2: Vec<Vec<Option<f64>>>,
    pub lam13: Vec<Vec<Option<f64>>>,
    pub lam14: Vec<Vec<Option<f64>>>,
    pub lam15: Vec<Vec<Option<f64>>>,
    pub mu5: Vec<Vec<Option<f64>>>,
    pub lam16: Vec<f64>,
    pub mu3_lo: Vec<Vec<f64>>,
    pub mu3_up: Vec<Vec<f64>>,
    pub mu4_lo: Vec<Vec<f64>>,
    pub mu4_up: Vec<Vec<f64>>,
    pub mu6_lo: Vec<Vec<f64>>,
    pub mu6_up: Vec<Vec<f64>>,
    /// `Ω_d`
    pub objective: f64,
    pub status: Vec<SolveStatus>,
    pub iterations: Vec<usize>,
    /// solver state per time step, reusable as a warm start
    #[serde(skip)]
    pub warm: Vec<WarmStart<f64>>,
}

/// `(μ̲, μ̄)`; a free multiplier `ν = μ̄ − μ̲` is split by sign.
fn unpack_box(b: &BoxDual, x: &[f64]) -> (f64, f64) {
    match *b {
        BoxDual::Pair { lo, up } => (x[lo], x[up]),
        BoxDual::Fixed(v) => ((-x[v]).max(0.0), x[v].max(0.0)),
    }
}

impl DualSolution {
    fn push_step(&mut self, lay: &DualLayout, x: &[f64], status: SolveStatus) {
        let pick = |idx: &[usize]| idx.iter().map(|&k| x[k]).collect::<Vec<f64>>();
        let opt = |idx: &[Option<usize>]| idx.iter().map(|k| k.map(|k| x[k])).collect::<Vec<_>>();
        self.lam1.push(pick(&lay.lam1));
        self.lam2.push(pick(&lay.lam2));
        self.lam_p.push(pick(&lay.lam_p));
        self.lam_q.push(pick(&lay.lam_q));
        self.lam7.push(opt(&lay.lam7));
        self.lam8.push(opt(&lay.lam8));
        self.lam9.push(opt(&lay.lam9));
        self.mu1.push(opt(&lay.mu1));
        self.lam10.push(opt(&lay.lam10));
        self.lam11.push(opt(&lay.lam11));
        self.lam12.push(opt(&lay.lam12));
        self.mu2.push(opt(&lay.mu2));
        self.lam13.push(opt(&lay.lam13));
        self.lam14.push(opt(&lay.lam14));
        self.lam15.push(opt(&lay.lam15));
        self.mu5.push(opt(&lay.mu5));
        self.lam16.push(x[lay.lam16]);
        let boxes = |b: &[BoxDual]| -> (Vec<f64>, Vec<f64>) { b.iter().map(|b| unpack_box(b, x)).unzip() };
        let (lo, up) = boxes(&lay.mu3);
        self.mu3_lo.push(lo);
        self.mu3_up.push(up);
        let (lo, up) = boxes(&lay.mu4);
        self.mu4_lo.push(lo);
        self.mu4_up.push(up);
        let (lo, up) = boxes(&lay.mu6);
        self.mu6_lo.push(lo);
        self.mu6_up.push(up);
        self.status.push(status);
    }

    /// Dual program vector for step `t`, with auxiliaries `u` recomputed from their rows.
    pub fn pack(&self, step: &DualStep, t: usize) -> Vec<f64> {
        let lay = &step.layout;
        let mut x = vec![0.0; step.program.num_vars()];
        let put = |x: &mut Vec<f64>, idx: &[usize], v: &[f64]| {
            for (&k, &val) in idx.iter().zip(v) {
                x[k] = val;
            }
        };
        let put_opt = |x: &mut Vec<f64>, idx: &[Option<usize>], v: &[Option<f64>]| {
            for (k, val) in idx.iter().zip(v) {
                if let (Some(k), Some(val)) = (k, val) {
                    x[*k] = *val;
                }
            }
        };
        put(&mut x, &lay.lam1, &self.lam1[t]);
        put(&mut x, &lay.lam2, &self.lam2[t]);
        put(&mut x, &lay.lam_p, &self.lam_p[t]);
        put(&mut x, &lay.lam_q, &self.lam_q[t]);
        put_opt(&mut x, &lay.lam7, &self.lam7[t]);
        put_opt(&mut x, &lay.lam8, &self.lam8[t]);
        put_opt(&mut x, &lay.lam9, &self.lam9[t]);
        put_opt(&mut x, &lay.mu1, &self.mu1[t]);
        put_opt(&mut x, &lay.lam10, &self.lam10[t]);
        put_opt(&mut x, &lay.lam11, &self.lam11[t]);
        put_opt(&mut x, &lay.lam12, &self.lam12[t]);
        put_opt(&mut x, &lay.mu2, &self.mu2[t]);
        put_opt(&mut x, &lay.lam13, &self.lam13[t]);
        put_opt(&mut x, &lay.lam14, &self.lam14[t]);
        put_opt(&mut x, &lay.lam15, &self.lam15[t]);
        put_opt(&mut x, &lay.mu5, &self.mu5[t]);
        x[lay.lam16] = self.lam16[t];
        let boxes = |x: &mut Vec<f64>, b: &[BoxDual], lo: &[f64], up: &[f64]| {
            for (k, b) in b.iter().enumerate() {
                match *b {
                    BoxDual::Pair { lo: l, up: u } => {
                        x[l] = lo[k];
                        x[u] = up[k];
                    }
                    BoxDual::Fixed(v) => x[v] = up[k] - lo[k],
                }
            }
        };
        boxes(&mut x, &lay.mu3, &self.mu3_lo[t], &self.mu3_up[t]);
        boxes(&mut x, &lay.mu4, &self.mu4_lo[t], &self.mu4_up[t]);
        boxes(&mut x, &lay.mu6, &self.mu6_lo[t], &self.mu6_up[t]);
        let prog = &step.program;
        for u in lay.u.iter().flatten() {
            let row = prog
                .eq_index(&prog.vars[*u].name.replacen("u[", "u_def[", 1))
                .expect("every u has a defining row");
            // terms − u = −c1 with u still zero
            x[*u] = prog.row_value(row, &x) - prog.eqs[row].rhs;
        }
        x
    }
}

/// Solves every time step of the dual in parallel.
pub fn solve_ll_dual(model: &LlDual, settings: &SolverSettings<f64>) -> Result<DualSolution, DualError> {
    solve_ll_dual_warm(model, None, settings)
}

pub fn solve_ll_dual_warm(
    model: &LlDual,
    warm: Option<&[WarmStart<f64>]>,
    settings: &SolverSettings<f64>,
) -> Result<DualSolution, DualError> {
    let raw: Vec<SolveResult<f64>> = model
        .steps
        .par_iter()
        .enumerate()
        .map(|(t, s)| {
            let ws = warm.and_then(|w| w.get(t));
            solve_conic_with(&s.program, ws, settings).map_err(|e| DualError::Program(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let mut out = DualSolution::default();
    for (t, (step, res)) in model.steps.iter().zip(&raw).enumerate() {
        if !res.is_optimal() {
            return Err(DualError::Solve { t, status: res.status });
        }
        out.push_step(&step.layout, &res.x, res.status);
        out.objective -= res.objective;
        out.iterations.push(res.iterations);
    }
    out.warm = raw.into_iter().map(|r| r.warm).collect();
    Ok(out)
}

/// Multipliers read from the primal solver's KKT point, in the same layout as a dual solve.
/// `objective` is the primal solver's dual objective.
pub fn dual_from_primal(model: &LlPrimal, sol: &PrimalSolution) -> DualSolution {
    let mut out = DualSolution::default();
    for (step, res) in model.steps.iter().zip(&sol.raw) {
        let lay = &step.layout;
        let y = &res.eq_multipliers;
        let rows = |idx: &[usize]| idx.iter().map(|&r| y[r]).collect::<Vec<f64>>();
        out.lam1.push(rows(&lay.bal_p));
        out.lam2.push(rows(&lay.bal_q));
        out.lam_p.push(rows(&lay.flow_p));
        out.lam_q.push(rows(&lay.flow_q));
        let wrow = |n: usize| lay.w_def.iter().map(|r| r.map(|r| y[r[n]])).collect::<Vec<_>>();
        out.mu1.push(wrow(0));
        out.lam7.push(wrow(1));
        out.lam8.push(wrow(2));
        out.lam9.push(wrow(3));
        out.lam10.push(lay.vchk_zero.iter().map(|r| r.map(|r| y[r])).collect());
        let frow = |n: usize| lay.f_def.iter().map(|r| r.map(|r| y[r[n]])).collect::<Vec<_>>();
        out.mu2.push(frow(0));
        out.lam11.push(frow(1));
        out.lam12.push(frow(2));
        out.lam13.push(lay.cos_one.iter().map(|r| r.map(|r| y[r])).collect());
        let cone = |n: usize| {
            lay.soc_lim
                .iter()
                .map(|c| c.map(|c| res.cone_multipliers[c][n]))
                .collect::<Vec<_>>()
        };
        out.mu5.push(cone(0));
        out.lam14.push(cone(1));
        out.lam15.push(cone(2));
        out.lam16.push(y[lay.ref_angle]);
        let lo = |idx: &[usize]| idx.iter().map(|&k| res.lower_multipliers[k]).collect::<Vec<f64>>();
        let up = |idx: &[usize]| idx.iter().map(|&k| res.upper_multipliers[k]).collect::<Vec<f64>>();
        out.mu3_lo.push(lo(&lay.pg));
        out.mu3_up.push(up(&lay.pg));
        out.mu4_lo.push(lo(&lay.qg));
        out.mu4_up.push(up(&lay.qg));
        out.mu6_lo.push(lo(&lay.v_d));
        out.mu6_up.push(up(&lay.v_d));
        out.objective += res.dual_objective;
        out.status.push(res.status);
    }
    out
}

/// `|Ω_p − Ω_d| / max(1, |Ω_p|)`
pub fn duality_gap(primal: &PrimalSolution, dual: &DualSolution) -> Result<f64, DualError> {
    if let Some(t) = primal.status.iter().position(|s| *s != SolveStatus::Optimal) {
        return Err(DualError::NotOptimal { side: "primal", t });
    }
    if let Some(t) = dual.status.iter().position(|s| *s != SolveStatus::Optimal) {
        return Err(DualError::NotOptimal { side: "dual", t });
    }
    Ok(relative_gap(primal.objective, dual.objective))
}

pub fn relative_gap(primal: f64, dual: f64) -> f64 {
    (primal - dual).abs() / primal.abs().max(1.0)
}

/// Largest violation of the dual cones and the smallest bound multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeCertificate {
    pub voltage: f64,
    pub cosine: f64,
    pub limit: f64,
    pub min_mu: f64,
}

impl ConeCertificate {
    pub fn max_violation(&self) -> f64 {
        self.voltage.max(self.cosine).max(self.limit)
    }
}

pub fn certify_dual_cones(dual: &DualSolution) -> ConeCertificate {
    let viol = |head: f64, tail: &[f64]| (tail.iter().map(|x| x * x).sum::<f64>().sqrt() - head).max(0.0);
    let mut c = ConeCertificate {
        voltage: 0.0,
        cosine: 0.0,
        limit: 0.0,
        min_mu: f64::INFINITY,
    };
    for t in 0..dual.lam1.len() {
        for k in 0..dual.mu1[t].len() {
            if let (Some(h), Some(a), Some(b), Some(d)) =
                (dual.mu1[t][k], dual.lam7[t][k], dual.lam8[t][k], dual.lam9[t][k])
            {
                c.voltage = c.voltage.max(viol(h, &[a, b, d]));
                c.min_mu = c.min_mu.min(h);
            }
        }
        for k in 0..dual.mu2[t].len() {
            if let (Some(h), Some(a), Some(b)) = (dual.mu2[t][k], dual.lam11[t][k], dual.lam12[t][k]) {
                c.cosine = c.cosine.max(viol(h, &[a, b]));
                c.min_mu = c.min_mu.min(h);
            }
        }
        for k in 0..dual.mu5[t].len() {
            if let (Some(h), Some(a), Some(b)) = (dual.mu5[t][k], dual.lam14[t][k], dual.lam15[t][k]) {
                c.limit = c.limit.max(viol(h, &[a, b]));
                c.min_mu = c.min_mu.min(h);
            }
        }
        for v in [
            &dual.mu3_lo[t],
            &dual.mu3_up[t],
            &dual.mu4_lo[t],
            &dual.mu4_up[t],
            &dual.mu6_lo[t],
            &dual.mu6_up[t],
        ] {
            c.min_mu = v.iter().fold(c.min_mu, |a, b| a.min(*b));
        }
    }
    if c.min_mu == f64::INFINITY {
        c.min_mu = 0.0;
    }
    c
}

/// ∞-norm of slack·multiplier products per inequality family, and |⟨x, z⟩| per cone family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlacknessReport {
    pub families: BTreeMap<String, f64>,
    /// same products divided by `max(1, |slack|·|multiplier|)`
    pub relative: BTreeMap<String, f64>,
}

impl SlacknessReport {
    pub fn max(&self) -> f64 {
        self.families.values().fold(0.0, |a, b| a.max(*b))
    }

    pub fn max_relative(&self) -> f64 {
        self.relative.values().fold(0.0, |a, b| a.max(*b))
    }
}

pub fn complementary_slackness_report(
    case: &NetworkCase,
    ix: &IndexSets,
    op: &OperatingPoint,
    primal: &PrimalSolution,
    dual: &DualSolution,
) -> SlacknessReport {
    let mut fam: BTreeMap<String, f64> = BTreeMap::new();
    let mut rel: BTreeMap<String, f64> = BTreeMap::new();
    let mut note_scaled = |name: &str, v: f64, scale: f64| {
        let e = fam.entry(name.to_string()).or_insert(0.0);
        *e = e.max(v.abs());
        let e = rel.entry(name.to_string()).or_insert(0.0);
        *e = e.max(v.abs() / scale.max(1.0));
    };
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    for t in 0..primal.pg.len() {
        let mut note = |name: &str, v: f64| note_scaled(name, v, 1.0);
        for (k, g) in case.generators.iter().enumerate() {
            if g.pmin != g.pmax {
                note("pg_lo", (primal.pg[t][k] - g.pmin) * dual.mu3_lo[t][k]);
                note("pg_up", (g.pmax - primal.pg[t][k]) * dual.mu3_up[t][k]);
            }
            if g.qmin != g.qmax {
                note("qg_lo", (primal.qg[t][k] - g.qmin) * dual.mu4_lo[t][k]);
                note("qg_up", (g.qmax - primal.qg[t][k]) * dual.mu4_up[t][k]);
            }
        }
        for (i, b) in case.buses.iter().enumerate() {
            if b.vmin != b.vmax {
                let v = op.v_op[t][i] + primal.v_d[t][i];
                note("v_lo", (v - b.vmin) * dual.mu6_lo[t][i]);
                note("v_up", (b.vmax - v) * dual.mu6_up[t][i]);
            }
        }
        for (k, w) in primal.w[t].iter().enumerate() {
            if let (Some(w), Some(h), Some(a), Some(b), Some(d)) =
                (w, dual.mu1[t][k], dual.lam7[t][k], dual.lam8[t][k], dual.lam9[t][k])
            {
                note_scaled("soc_v", w[0] * h + w[1] * a + w[2] * b + w[3] * d, norm(w) * norm(&[h, a, b, d]));
            }
        }
        for (k, f) in primal.f[t].iter().enumerate() {
            if let (Some(f), Some(h), Some(a), Some(b)) = (f, dual.mu2[t][k], dual.lam11[t][k], dual.lam12[t][k]) {
                note_scaled("soc_cos", f[0] * h + f[1] * a + f[2] * b, norm(f) * norm(&[h, a, b]));
            }
        }
        for (a, arc) in ix.arcs().enumerate() {
            if let (Some(h), Some(l14), Some(l15)) = (dual.mu5[t][a], dual.lam14[t][a], dual.lam15[t][a]) {
                let s = case.branches[arc.branch].s_max;
                let x = [s, primal.p[t][a], primal.q[t][a]];
                note_scaled("soc_lim", s * h + x[1] * l14 + x[2] * l15, norm(&x) * norm(&[h, l14, l15]));
            }
        }
    }
    SlacknessReport { families: fam, relative: rel }
}
