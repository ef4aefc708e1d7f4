use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::bilevel::StorageSchedule;
use crate::conic::ConicProgram;
use crate::netcase::{IndexSets, NetworkCase};
use crate::pfexact::OperatingPoint;

use super::{BuildError, DerivedCoeffs, PresolveFlags};

/// Variable, row and cone indices of one time step's subprogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLayout {
    pub th_d: Vec<usize>,
    pub v_d: Vec<usize>,
    pub p: Vec<usize>,
    pub q: Vec<usize>,
    pub pg: Vec<usize>,
    pub qg: Vec<usize>,
    pub cos_hat: Vec<usize>,
    pub v_chk: Vec<usize>,
    pub w: Vec<Option<[usize; 4]>>,
    pub f: Vec<Option<[usize; 3]>>,
    pub s_lim: Vec<Option<usize>>,
    pub bal_p: Vec<usize>,
    pub bal_q: Vec<usize>,
    /// forward rows first, then reverse
    pub flow_p: Vec<usize>,
    pub flow_q: Vec<usize>,
    /// rows defining `w0, w1, w2, w3`
    pub w_def: Vec<Option<[usize; 4]>>,
    pub vchk_zero: Vec<Option<usize>>,
    /// rows defining `f0, f1, f2`
    pub f_def: Vec<Option<[usize; 3]>>,
    pub cos_one: Vec<Option<usize>>,
    pub ref_angle: usize,
    pub soc_v: Vec<Option<usize>>,
    pub soc_cos: Vec<Option<usize>>,
    pub soc_lim: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct PrimalStep {
    pub program: ConicProgram<f64>,
    pub layout: StepLayout,
}

/// Lower-level primal as independent per-step subprograms.
#[derive(Debug, Clone)]
pub struct LlPrimal {
    pub steps: Vec<PrimalStep>,
}

impl LlPrimal {
    /// Block-diagonal program over all time steps with `(var, eq, cone)` offsets per step.
    pub fn combined(&self) -> (ConicProgram<f64>, Vec<(usize, usize, usize)>) {
        let parts: Vec<ConicProgram<f64>> = self.steps.iter().map(|s| s.program.clone()).collect();
        ConicProgram::block_diagonal(&parts)
    }
}

/// Per-bus net demand including the storage injection at its bus.
pub(crate) fn bus_demand(
    case: &NetworkCase,
    ix: &IndexSets,
    t: usize,
    schedule: Option<&StorageSchedule>,
) -> (Vec<f64>, Vec<f64>) {
    let n = case.buses.len();
    let mut pd = vec![0.0; n];
    let mut qd = vec![0.0; n];
    for (i, loads) in ix.loads_at.iter().enumerate() {
        for &l in loads {
            pd[i] += case.loads[l].p_d[t];
            qd[i] += case.loads[l].q_d[t];
        }
    }
    if let (Some(b), Some(s)) = (ix.storage_bus, schedule) {
        pd[b] += s.p_es[t];
        qd[b] += s.q_es[t];
    }
    (pd, qd)
}

pub(crate) fn shunt_totals(case: &NetworkCase, ix: &IndexSets) -> (Vec<f64>, Vec<f64>) {
    let g = ix
        .shunts_at
        .iter()
        .map(|s| s.iter().map(|&k| case.shunts[k].g_sh).sum())
        .collect();
    let b = ix
        .shunts_at
        .iter()
        .map(|s| s.iter().map(|&k| case.shunts[k].b_sh).sum())
        .collect();
    (g, b)
}

pub fn build_ll_primal(
    case: &NetworkCase,
    ix: &IndexSets,
    op: &OperatingPoint,
    coeffs: &DerivedCoeffs,
    flags: &PresolveFlags,
    schedule: Option<&StorageSchedule>,
) -> Result<LlPrimal, BuildError> {
    if op.v_op.len() != case.horizon || flags.horizon() != case.horizon || coeffs.cps.len() != case.horizon {
        return Err(BuildError::Horizon {
            case: case.horizon,
            op: op.v_op.len(),
            flags: flags.horizon(),
        });
    }
    if let Some(s) = schedule {
        if s.horizon() != case.horizon {
            return Err(BuildError::Horizon {
                case: case.horizon,
                op: op.v_op.len(),
                flags: s.horizon(),
            });
        }
    }
    let steps = (0..case.horizon)
        .map(|t| build_ll_primal_step(case, ix, op, coeffs, flags, schedule, t))
        .collect::<Result<_, _>>()?;
    Ok(LlPrimal { steps })
}

pub fn build_ll_primal_step(
    case: &NetworkCase,
    ix: &IndexSets,
    op: &OperatingPoint,
    coeffs: &DerivedCoeffs,
    flags: &PresolveFlags,
    schedule: Option<&StorageSchedule>,
    t: usize,
) -> Result<PrimalStep, BuildError> {
    let nb = case.buses.len();
    let m = ix.forward.len();
    let arcs: Vec<_> = ix.forward.iter().chain(&ix.reverse).copied().collect();
    let vop = &op.v_op[t];
    let thop = &op.th_op[t];
    let bus_id = |i: usize| case.buses[i].id;
    let arc_name = |a: usize| {
        let arc = &arcs[a];
        format!("{t},{},{},{}", case.branches[arc.branch].id, bus_id(arc.from), bus_id(arc.to))
    };
    let pair_name = |k: usize| {
        let (i, j) = ix.pairs[k];
        format!("{t},{},{}", bus_id(i), bus_id(j))
    };
    let branch_name = |k: usize| format!("{t},{}", case.branches[ix.forward[k].branch].id);

    let mut prog = ConicProgram::<f64>::new();
    let th_d: Vec<usize> = (0..nb).map(|i| prog.free_var(format!("th_d[{t},{}]", bus_id(i)))).collect();
    let v_d: Vec<usize> = case
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| {
            prog.add_var(
                format!("v_d[{t},{}]", b.id),
                Some(b.vmin - vop[i]),
                Some(b.vmax - vop[i]),
            )
        })
        .collect();
    let p: Vec<usize> = (0..2 * m).map(|a| prog.free_var(format!("p[{}]", arc_name(a)))).collect();
    let q: Vec<usize> = (0..2 * m).map(|a| prog.free_var(format!("q[{}]", arc_name(a)))).collect();
    let mut pg = Vec::new();
    let mut qg = Vec::new();
    for g in &case.generators {
        let kp = prog.add_var(format!("pg[{t},{}]", g.id), Some(g.pmin), Some(g.pmax));
        prog.add_quad(kp, g.c2);
        prog.add_linear(kp, g.c1);
        prog.constant += g.c0;
        pg.push(kp);
        qg.push(prog.add_var(format!("qg[{t},{}]", g.id), Some(g.qmin), Some(g.qmax)));
    }
    let cos_hat: Vec<usize> = (0..ix.pairs.len())
        .map(|k| prog.free_var(format!("cos_hat[{}]", pair_name(k))))
        .collect();
    let v_chk: Vec<usize> = (0..m).map(|k| prog.free_var(format!("v_chk[{}]", branch_name(k)))).collect();

    let (pd, qd) = bus_demand(case, ix, t, schedule);
    let (gsh, bsh) = shunt_totals(case, ix);

    let mut bal_p = Vec::with_capacity(nb);
    let mut bal_q = Vec::with_capacity(nb);
    for i in 0..nb {
        let mut tp: Vec<(usize, f64)> = ix.gens_at[i].iter().map(|&k| (pg[k], 1.0)).collect();
        let mut tq: Vec<(usize, f64)> = ix.gens_at[i].iter().map(|&k| (qg[k], 1.0)).collect();
        for (a, arc) in arcs.iter().enumerate() {
            if arc.from == i {
                tp.push((p[a], -1.0));
                tq.push((q[a], -1.0));
            }
        }
        if gsh[i] != 0.0 {
            tp.push((v_d[i], -2.0 * vop[i] * gsh[i]));
        }
        if bsh[i] != 0.0 {
            tq.push((v_d[i], 2.0 * vop[i] * bsh[i]));
        }
        let id = bus_id(i);
        bal_p.push(prog.add_eq(format!("bal_p[{t},{id}]"), tp, pd[i] + vop[i] * vop[i] * gsh[i]));
        bal_q.push(prog.add_eq(format!("bal_q[{t},{id}]"), tq, qd[i] - vop[i] * vop[i] * bsh[i]));
    }

    let mut flow_p = vec![0; 2 * m];
    let mut flow_q = vec![0; 2 * m];
    for (a, arc) in arcs.iter().enumerate() {
        let br = &case.branches[arc.branch];
        let k = a % m;
        let (i, j) = (arc.from, arc.to);
        let (vi, vj) = (vop[i], vop[j]);
        let tau = br.tau;
        let (gs, bs, scale, fam) = if arc.reverse {
            (br.g_to, br.b_to, 1.0, "to")
        } else {
            (br.g_fr, br.b_fr, tau * tau, "fr")
        };
        let cps = coeffs.cps[t][a];
        let cms = coeffs.cms[t][a];
        let ch = cos_hat[ix.pair_of[k]];
        let prow = vec![
            (p[a], 1.0),
            (v_d[i], -2.0 * vi * (br.g + gs) / scale + cps * vj / tau),
            (v_d[j], cps * vi / tau),
            (v_chk[k], -0.5),
            (ch, cps * vi * vj / tau),
            (th_d[i], cms * vi * vj / tau),
            (th_d[j], -cms * vi * vj / tau),
        ];
        flow_p[a] = prog.add_eq(
            format!("flow_p_{fam}[{}]", arc_name(a)),
            prow,
            vi * vi * (br.g + gs) / scale,
        );
        let qrow = vec![
            (q[a], 1.0),
            (v_d[i], 2.0 * vi * (br.b + bs) / scale - cms * vj / tau),
            (v_d[j], -cms * vi / tau),
            (ch, -cms * vi * vj / tau),
            (th_d[i], cps * vi * vj / tau),
            (th_d[j], -cps * vi * vj / tau),
        ];
        flow_q[a] = prog.add_eq(
            format!("flow_q_{fam}[{}]", arc_name(a)),
            qrow,
            -vi * vi * (br.b + bs) / scale,
        );
    }

    let mut w = vec![None; m];
    let mut w_def = vec![None; m];
    let mut vchk_zero = vec![None; m];
    let mut soc_v = vec![None; m];
    for (k, arc) in ix.forward.iter().enumerate() {
        let name = branch_name(k);
        if flags.lam[t][k] {
            let (Some(p1), Some(p2), Some(p3)) = (coeffs.p1[t][k], coeffs.p2[t][k], coeffs.p3[t][k]) else {
                return Err(BuildError::UndefinedCoeffs {
                    branch: case.branches[arc.branch].id,
                    t,
                });
            };
            let ws = [0, 1, 2, 3].map(|n| prog.free_var(format!("w{n}[{name}]")));
            let (i, j) = (arc.from, arc.to);
            let rows = [
                prog.add_eq(format!("w0_def[{name}]"), vec![(ws[0], 1.0), (v_chk[k], -0.5)], 0.5),
                prog.add_eq(format!("w1_def[{name}]"), vec![(ws[1], 1.0), (v_chk[k], 0.5)], 0.5),
                prog.add_eq(
                    format!("w2_def[{name}]"),
                    vec![(ws[2], 1.0), (v_d[i], -p1), (v_d[j], p2)],
                    0.0,
                ),
                prog.add_eq(format!("w3_def[{name}]"), vec![(ws[3], 1.0), (v_d[i], -p3)], 0.0),
            ];
            soc_v[k] = Some(prog.add_soc(format!("soc_v[{name}]"), ws.to_vec()));
            w[k] = Some(ws);
            w_def[k] = Some(rows);
        } else {
            vchk_zero[k] = Some(prog.add_eq(format!("vchk_zero[{name}]"), vec![(v_chk[k], 1.0)], 0.0));
        }
    }

    let np = ix.pairs.len();
    let mut f = vec![None; np];
    let mut f_def = vec![None; np];
    let mut cos_one = vec![None; np];
    let mut soc_cos = vec![None; np];
    for (k, &(i, j)) in ix.pairs.iter().enumerate() {
        let name = pair_name(k);
        if flags.gam[t][k] {
            let fs = [0, 1, 2].map(|n| prog.free_var(format!("f{n}[{name}]")));
            let rows = [
                prog.add_eq(format!("f0_def[{name}]"), vec![(fs[0], 1.0), (cos_hat[k], 1.0)], 1.25),
                prog.add_eq(
                    format!("f1_def[{name}]"),
                    vec![(fs[1], 1.0), (th_d[i], -1.0 / SQRT_2), (th_d[j], 1.0 / SQRT_2)],
                    0.0,
                ),
                prog.add_eq(format!("f2_def[{name}]"), vec![(fs[2], 1.0), (cos_hat[k], -1.0)], -0.75),
            ];
            soc_cos[k] = Some(prog.add_soc(format!("soc_cos[{name}]"), fs.to_vec()));
            f[k] = Some(fs);
            f_def[k] = Some(rows);
        } else {
            cos_one[k] = Some(prog.add_eq(format!("cos_one[{name}]"), vec![(cos_hat[k], 1.0)], 1.0));
        }
    }

    let mut s_lim = vec![None; 2 * m];
    let mut soc_lim = vec![None; 2 * m];
    for (a, arc) in arcs.iter().enumerate() {
        if !flags.phi[t][a] {
            continue;
        }
        let br = &case.branches[arc.branch];
        if br.s_max <= 0.0 {
            return Err(BuildError::UnratedLimit { branch: br.id, t });
        }
        let name = arc_name(a);
        let s = prog.add_var(format!("s_lim[{name}]"), Some(br.s_max), Some(br.s_max));
        soc_lim[a] = Some(prog.add_soc(format!("soc_lim[{name}]"), vec![s, p[a], q[a]]));
        s_lim[a] = Some(s);
    }

    let r = ix.reference;
    let ref_angle = prog.add_eq(format!("ref_angle[{t},{}]", bus_id(r)), vec![(th_d[r], 1.0)], -thop[r]);

    Ok(PrimalStep {
        program: prog,
        layout: StepLayout {
            th_d,
            v_d,
            p,
            q,
            pg,
            qg,
            cos_hat,
            v_chk,
            w,
            f,
            s_lim,
            bal_p,
            bal_q,
            flow_p,
            flow_q,
            w_def,
            vchk_zero,
            f_def,
            cos_one,
            ref_angle,
            soc_v,
            soc_cos,
            soc_lim,
        },
    })
}
