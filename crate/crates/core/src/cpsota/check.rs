use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::netcase::{Branch, IndexSets, NetworkCase};
use crate::pfexact::OperatingPoint;
use crate::physics::{arc_flow, BranchParams};

use super::{voltage_cone_coeffs, DerivedCoeffs, PrimalSolution};

/// Deltas and auxiliary values for one branch at which both constraint forms are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaPoint {
    pub v_d_i: f64,
    pub v_d_j: f64,
    pub th_d_i: f64,
    pub th_d_j: f64,
    pub v_chk: f64,
    pub cos_hat: f64,
}

/// Slack of each form (nonnegative means satisfied); the voltage cone is `None`
/// when its coefficients are undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceCheck {
    pub voltage_cone: Option<f64>,
    pub voltage_quadratic: f64,
    pub cosine_cone: f64,
    pub cosine_quadratic: f64,
}

impl EquivalenceCheck {
    /// `(voltage forms agree, cosine forms agree)`
    pub fn agreement(&self) -> (bool, bool) {
        let v = self
            .voltage_cone
            .map_or(true, |c| (c >= 0.0) == (self.voltage_quadratic >= 0.0));
        (v, (self.cosine_cone >= 0.0) == (self.cosine_quadratic >= 0.0))
    }
}

pub fn soc_equivalence_check(pt: &DeltaPoint, br: &Branch, th_op_i: f64, th_op_j: f64) -> EquivalenceCheck {
    let phi = th_op_i - th_op_j - br.sigma;
    let (x, y) = (pt.v_d_i, pt.v_d_j);
    let quad = (br.g + br.g_fr) * x * x / (br.tau * br.tau) - 2.0 * br.g * phi.cos() * x * y / br.tau
        + (br.g + br.g_to) * y * y;
    let voltage_cone = voltage_cone_coeffs(br.g, br.g_fr, br.g_to, br.tau, phi).map(|(p1, p2, p3)| {
        let w0 = (1.0 + pt.v_chk) / 2.0;
        let w1 = (1.0 - pt.v_chk) / 2.0;
        let w2 = p1 * x - p2 * y;
        let w3 = p3 * x;
        w0 - (w1 * w1 + w2 * w2 + w3 * w3).sqrt()
    });
    let d = pt.th_d_i - pt.th_d_j;
    let f0 = 1.25 - pt.cos_hat;
    let f1 = d / SQRT_2;
    let f2 = pt.cos_hat - 0.75;
    EquivalenceCheck {
        voltage_cone,
        voltage_quadratic: pt.v_chk - quad,
        cosine_cone: f0 - f1.hypot(f2),
        cosine_quadratic: 1.0 - d * d / 2.0 - pt.cos_hat,
    }
}

/// Right-hand sides of the linearized flow equations for arc `a` (forward then reverse).
#[allow(clippy::too_many_arguments)]
pub fn cpsota_arc_flow(
    case: &NetworkCase,
    ix: &IndexSets,
    op: &OperatingPoint,
    coeffs: &DerivedCoeffs,
    t: usize,
    a: usize,
    v_d: &[f64],
    th_d: &[f64],
    cos_hat: f64,
    v_chk: f64,
) -> (f64, f64) {
    let m = ix.forward.len();
    let arc = if a < m { ix.forward[a] } else { ix.reverse[a - m] };
    let br = &case.branches[arc.branch];
    let (i, j) = (arc.from, arc.to);
    let (vi, vj) = (op.v_op[t][i], op.v_op[t][j]);
    let (gs, bs, scale) = if arc.reverse {
        (br.g_to, br.b_to, 1.0)
    } else {
        (br.g_fr, br.b_fr, br.tau * br.tau)
    };
    let (cps, cms) = (coeffs.cps[t][a], coeffs.cms[t][a]);
    let sq = vi * vi + 2.0 * vi * v_d[i];
    let lin = vi * vj * cos_hat + v_d[i] * vj + v_d[j] * vi;
    let dth = vi * vj * (th_d[i] - th_d[j]);
    let p = sq * (br.g + gs) / scale + v_chk / 2.0 - cps * lin / br.tau - cms * dth / br.tau;
    let q = -sq * (br.b + bs) / scale + cms * lin / br.tau - cps * dth / br.tau;
    (p, q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowErrorReport {
    /// `[t][arc]` absolute active-power error
    pub p_err: Vec<Vec<f64>>,
    pub q_err: Vec<Vec<f64>>,
    pub max_p: f64,
    pub max_q: f64,
    pub mean_p: f64,
    pub mean_q: f64,
}

/// Compares model flows with exact π-model flows at `(V_op + V_Δ, θ_op + θ_Δ)`.
pub fn evaluate_flow_error(
    sol: &PrimalSolution,
    case: &NetworkCase,
    ix: &IndexSets,
    op: &OperatingPoint,
) -> FlowErrorReport {
    let mut rep = FlowErrorReport {
        p_err: vec![],
        q_err: vec![],
        max_p: 0.0,
        max_q: 0.0,
        mean_p: 0.0,
        mean_q: 0.0,
    };
    let mut count = 0usize;
    for t in 0..sol.p.len() {
        let v: Vec<f64> = op.v_op[t].iter().zip(&sol.v_d[t]).map(|(a, b)| a + b).collect();
        let th: Vec<f64> = op.th_op[t].iter().zip(&sol.th_d[t]).map(|(a, b)| a + b).collect();
        let mut pe = Vec::with_capacity(sol.p[t].len());
        let mut qe = Vec::with_capacity(sol.p[t].len());
        for (a, arc) in ix.forward.iter().chain(&ix.reverse).enumerate() {
            let prm = BranchParams::<f64>::from_branch(&case.branches[arc.branch]);
            let (i, j) = (arc.from, arc.to);
            let (p, q) = arc_flow(&prm, arc.reverse, v[i], v[j], th[i], th[j]);
            pe.push((sol.p[t][a] - p).abs());
            qe.push((sol.q[t][a] - q).abs());
        }
        rep.max_p = pe.iter().fold(rep.max_p, |m, x| m.max(*x));
        rep.max_q = qe.iter().fold(rep.max_q, |m, x| m.max(*x));
        rep.mean_p += pe.iter().sum::<f64>();
        rep.mean_q += qe.iter().sum::<f64>();
        count += pe.len();
        rep.p_err.push(pe);
        rep.q_err.push(qe);
    }
    if count > 0 {
        rep.mean_p /= count as f64;
        rep.mean_q /= count as f64;
    }
    rep
}
