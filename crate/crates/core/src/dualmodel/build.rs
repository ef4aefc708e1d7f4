use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::bilevel::StorageSchedule;
use crate::conic::ConicProgram;
use crate::cpsota::{bus_demand, shunt_totals, BuildError, DerivedCoeffs, PresolveFlags};
use crate::netcase::{IndexSets, NetworkCase};
use crate::pfexact::OperatingPoint;

/// Constant shunt contribution to the dual objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuntTermForm {
    /// `−Σ(g_sh·λ1 − b_sh·λ2)`
    Printed,
    /// `−Σ V_op²·(g_sh·λ1 − b_sh·λ2)`, the form matching the linearized balance
    #[default]
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DualOptions {
    pub shunt: ShuntTermForm,
}

/// Multipliers of a two-sided box; a fixed variable gets one free multiplier `μ̄ − μ̲`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoxDual {
    Pair { lo: usize, up: usize },
    Fixed(usize),
}

/// Dual variable and row indices of one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualLayout {
    pub lam1: Vec<usize>,
    pub lam2: Vec<usize>,
    /// `λ3` on forward arcs then `λ4` on reverse arcs
    pub lam_p: Vec<usize>,
    /// `λ5` on forward arcs then `λ6` on reverse arcs
    pub lam_q: Vec<usize>,
    pub lam7: Vec<Option<usize>>,
    pub lam8: Vec<Option<usize>>,
    pub lam9: Vec<Option<usize>>,
    pub mu1: Vec<Option<usize>>,
    pub lam10: Vec<Option<usize>>,
    pub lam11: Vec<Option<usize>>,
    pub lam12: Vec<Option<usize>>,
    pub mu2: Vec<Option<usize>>,
    pub lam13: Vec<Option<usize>>,
    pub lam14: Vec<Option<usize>>,
    pub lam15: Vec<Option<usize>>,
    pub mu5: Vec<Option<usize>>,
    pub lam16: usize,
    pub mu3: Vec<BoxDual>,
    pub mu4: Vec<BoxDual>,
    pub mu6: Vec<BoxDual>,
    /// `ċ + μ̄3 − μ̲3 + λ1` for generators with `c̈ > 0`
    pub u: Vec<Option<usize>>,
    pub stat_th: Vec<usize>,
    pub stat_v: Vec<usize>,
    pub stat_p: Vec<usize>,
    pub stat_q: Vec<usize>,
    pub stat_pg: Vec<Option<usize>>,
    pub stat_qg: Vec<usize>,
    pub stat_cos: Vec<usize>,
    pub stat_vchk: Vec<usize>,
    pub soc_v: Vec<Option<usize>>,
    pub soc_cos: Vec<Option<usize>>,
    pub soc_lim: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct DualStep {
    /// minimizes `−Ω_d`
    pub program: ConicProgram<f64>,
    pub layout: DualLayout,
}

#[derive(Debug, Clone)]
pub struct LlDual {
    pub steps: Vec<DualStep>,
}

/// Accumulates sparse row terms keyed by dual variable.
struct Rows {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Rows {
    fn new(n: usize) -> Self {
        Self { rows: vec![Vec::new(); n] }
    }
    fn add(&mut self, row: usize, var: usize, coef: f64) {
        if coef != 0.0 {
            self.rows[row].push((var, coef));
        }
    }
}

/// `fam` is the multiplier number, `idx` the bracketed index.
fn box_dual(prog: &mut ConicProgram<f64>, fam: u8, idx: &str, lo: f64, up: f64) -> BoxDual {
    if lo == up {
        BoxDual::Fixed(prog.free_var(format!("nu{fam}[{idx}]")))
    } else {
        let l = prog.add_var(format!("mu{fam}_lo[{idx}]"), Some(0.0), None);
        let u = prog.add_var(format!("mu{fam}_up[{idx}]"), Some(0.0), None);
        BoxDual::Pair { lo: l, up: u }
    }
}

fn box_terms(b: BoxDual) -> Vec<(usize, f64)> {
    match b {
        BoxDual::Pair { lo, up } => vec![(up, 1.0), (lo, -1.0)],
        BoxDual::Fixed(v) => vec![(v, 1.0)],
    }
}

/// Adds `−(u·up − l·lo)` to the minimized objective, i.e. `−u·μ̄ + l·μ̲` to `Ω_d`.
fn box_objective(prog: &mut ConicProgram<f64>, b: BoxDual, lo: f64, up: f64) {
    match b {
        BoxDual::Pair { lo: l, up: u } => {
            prog.add_linear(u, up);
            prog.add_linear(l, -lo);
        }
        BoxDual::Fixed(v) => prog.add_linear(v, up),
    }
}

pub fn build_ll_dual(
    case: &NetworkCase,
    ix: &IndexSets,
    op: &OperatingPoint,
    coeffs: &DerivedCoeffs,
    flags: &PresolveFlags,
    schedule: Option<&StorageSchedule>,
    opts: &DualOptions,
) -> Result<LlDual, BuildError> {
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
        .map(|t| build_ll_dual_step(case, ix, op, coeffs, flags, schedule, opts, t))
        .collect::<Result<_, _>>()?;
    Ok(LlDual { steps })
}

#[allow(clippy::too_many_arguments)]
pub fn build_ll_dual_step(
    case: &NetworkCase,
    ix: &IndexSets,
    op: &OperatingPoint,
    coeffs: &DerivedCoeffs,
    flags: &PresolveFlags,
    schedule: Option<&StorageSchedule>,
    opts: &DualOptions,
    t: usize,
) -> Result<DualStep, BuildError> {
    let nb = case.buses.len();
    let m = ix.forward.len();
    let np = ix.pairs.len();
    let ng = case.generators.len();
    let arcs: Vec<_> = ix.forward.iter().chain(&ix.reverse).copied().collect();
    let vop = &op.v_op[t];
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
    let lam1: Vec<usize> = (0..nb).map(|i| prog.free_var(format!("lam1[{t},{}]", bus_id(i)))).collect();
    let lam2: Vec<usize> = (0..nb).map(|i| prog.free_var(format!("lam2[{t},{}]", bus_id(i)))).collect();
    let lam_p: Vec<usize> = (0..2 * m)
        .map(|a| prog.free_var(format!("{}[{}]", if a < m { "lam3" } else { "lam4" }, arc_name(a))))
        .collect();
    let lam_q: Vec<usize> = (0..2 * m)
        .map(|a| prog.free_var(format!("{}[{}]", if a < m { "lam5" } else { "lam6" }, arc_name(a))))
        .collect();

    let mut lam7 = vec![None; m];
    let mut lam8 = vec![None; m];
    let mut lam9 = vec![None; m];
    let mut mu1 = vec![None; m];
    let mut lam10 = vec![None; m];
    let mut soc_v = vec![None; m];
    for (k, arc) in ix.forward.iter().enumerate() {
        let name = branch_name(k);
        if flags.lam[t][k] {
            if !coeffs.voltage_cone_defined(t, k) {
                return Err(BuildError::UndefinedCoeffs {
                    branch: case.branches[arc.branch].id,
                    t,
                });
            }
            let h = prog.free_var(format!("mu1[{name}]"));
            let v7 = prog.free_var(format!("lam7[{name}]"));
            let v8 = prog.free_var(format!("lam8[{name}]"));
            let v9 = prog.free_var(format!("lam9[{name}]"));
            soc_v[k] = Some(prog.add_soc(format!("dsoc_v[{name}]"), vec![h, v7, v8, v9]));
            mu1[k] = Some(h);
            lam7[k] = Some(v7);
            lam8[k] = Some(v8);
            lam9[k] = Some(v9);
        } else {
            lam10[k] = Some(prog.free_var(format!("lam10[{name}]")));
        }
    }

    let mut lam11 = vec![None; np];
    let mut lam12 = vec![None; np];
    let mut mu2 = vec![None; np];
    let mut lam13 = vec![None; np];
    let mut soc_cos = vec![None; np];
    for k in 0..np {
        let name = pair_name(k);
        if flags.gam[t][k] {
            let h = prog.free_var(format!("mu2[{name}]"));
            let v11 = prog.free_var(format!("lam11[{name}]"));
            let v12 = prog.free_var(format!("lam12[{name}]"));
            soc_cos[k] = Some(prog.add_soc(format!("dsoc_cos[{name}]"), vec![h, v11, v12]));
            mu2[k] = Some(h);
            lam11[k] = Some(v11);
            lam12[k] = Some(v12);
        } else {
            lam13[k] = Some(prog.free_var(format!("lam13[{name}]")));
        }
    }

    let mut lam14 = vec![None; 2 * m];
    let mut lam15 = vec![None; 2 * m];
    let mut mu5 = vec![None; 2 * m];
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
        let h = prog.free_var(format!("mu5[{name}]"));
        let v14 = prog.free_var(format!("lam14[{name}]"));
        let v15 = prog.free_var(format!("lam15[{name}]"));
        soc_lim[a] = Some(prog.add_soc(format!("dsoc_lim[{name}]"), vec![h, v14, v15]));
        prog.add_linear(h, br.s_max);
        mu5[a] = Some(h);
        lam14[a] = Some(v14);
        lam15[a] = Some(v15);
    }

    let r = ix.reference;
    let lam16 = prog.free_var(format!("lam16[{t},{}]", bus_id(r)));

    let mu3: Vec<BoxDual> = case
        .generators
        .iter()
        .map(|g| box_dual(&mut prog, 3, &format!("{t},{}", g.id), g.pmin, g.pmax))
        .collect();
    let mu4: Vec<BoxDual> = case
        .generators
        .iter()
        .map(|g| box_dual(&mut prog, 4, &format!("{t},{}", g.id), g.qmin, g.qmax))
        .collect();
    let mu6: Vec<BoxDual> = case
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| box_dual(&mut prog, 6, &format!("{t},{}", b.id), b.vmin - vop[i], b.vmax - vop[i]))
        .collect();

    // objective: minimize −Ω_d
    let (pd, qd) = bus_demand(case, ix, t, schedule);
    let (gsh, bsh) = shunt_totals(case, ix);
    for g in &case.generators {
        prog.constant -= g.c0;
    }
    for (k, g) in case.generators.iter().enumerate() {
        box_objective(&mut prog, mu3[k], g.pmin, g.pmax);
        box_objective(&mut prog, mu4[k], g.qmin, g.qmax);
    }
    for (i, b) in case.buses.iter().enumerate() {
        box_objective(&mut prog, mu6[i], b.vmin - vop[i], b.vmax - vop[i]);
        let scale = match opts.shunt {
            ShuntTermForm::Printed => 1.0,
            ShuntTermForm::Scaled => vop[i] * vop[i],
        };
        prog.add_linear(lam1[i], pd[i] + scale * gsh[i]);
        prog.add_linear(lam2[i], qd[i] - scale * bsh[i]);
    }
    for (a, arc) in arcs.iter().enumerate() {
        let br = &case.branches[arc.branch];
        let (gs, bs, scl) = if arc.reverse {
            (br.g_to, br.b_to, 1.0)
        } else {
            (br.g_fr, br.b_fr, br.tau * br.tau)
        };
        let vi2 = vop[arc.from] * vop[arc.from];
        prog.add_linear(lam_p[a], vi2 * (br.g + gs) / scl);
        prog.add_linear(lam_q[a], -vi2 * (br.b + bs) / scl);
    }
    for k in 0..m {
        if let (Some(v7), Some(h)) = (lam7[k], mu1[k]) {
            prog.add_linear(v7, 0.5);
            prog.add_linear(h, 0.5);
        }
    }
    for k in 0..np {
        if let Some(v13) = lam13[k] {
            prog.add_linear(v13, 1.0);
        }
        if let (Some(v12), Some(h)) = (lam12[k], mu2[k]) {
            prog.add_linear(v12, -0.75);
            prog.add_linear(h, 1.25);
        }
    }
    prog.add_linear(lam16, -op.th_op[t][r]);

    // stationarity rows, in primal variable order
    let mut th = Rows::new(nb);
    let mut vv = Rows::new(nb);
    let mut cs = Rows::new(np);
    let mut vc = Rows::new(m);
    for (a, arc) in arcs.iter().enumerate() {
        let br = &case.branches[arc.branch];
        let k = a % m;
        let (i, j) = (arc.from, arc.to);
        let (vi, vj) = (vop[i], vop[j]);
        let tau = br.tau;
        let (gs, bs, scl) = if arc.reverse {
            (br.g_to, br.b_to, 1.0)
        } else {
            (br.g_fr, br.b_fr, tau * tau)
        };
        let cps = coeffs.cps[t][a];
        let cms = coeffs.cms[t][a];
        let (lp, lq) = (lam_p[a], lam_q[a]);
        th.add(i, lp, cms * vi * vj / tau);
        th.add(j, lp, -cms * vi * vj / tau);
        th.add(i, lq, cps * vi * vj / tau);
        th.add(j, lq, -cps * vi * vj / tau);
        vv.add(i, lp, -2.0 * vi * (br.g + gs) / scl + cps * vj / tau);
        vv.add(j, lp, cps * vi / tau);
        vv.add(i, lq, 2.0 * vi * (br.b + bs) / scl - cms * vj / tau);
        vv.add(j, lq, -cms * vi / tau);
        let pk = ix.pair_of[k];
        cs.add(pk, lp, cps * vi * vj / tau);
        cs.add(pk, lq, -cms * vi * vj / tau);
        vc.add(k, lp, -0.5);
    }
    for (k, arc) in ix.forward.iter().enumerate() {
        if let (Some(v7), Some(v8), Some(v9), Some(h)) = (lam7[k], lam8[k], lam9[k], mu1[k]) {
            let (p1, p2, p3) = (
                coeffs.p1[t][k].unwrap_or_default(),
                coeffs.p2[t][k].unwrap_or_default(),
                coeffs.p3[t][k].unwrap_or_default(),
            );
            vv.add(arc.from, v8, -p1);
            vv.add(arc.to, v8, p2);
            vv.add(arc.from, v9, -p3);
            vc.add(k, h, -0.5);
            vc.add(k, v7, 0.5);
        }
        if let Some(v10) = lam10[k] {
            vc.add(k, v10, 1.0);
        }
    }
    for (k, &(i, j)) in ix.pairs.iter().enumerate() {
        if let (Some(v11), Some(v12), Some(h)) = (lam11[k], lam12[k], mu2[k]) {
            th.add(i, v11, -1.0 / SQRT_2);
            th.add(j, v11, 1.0 / SQRT_2);
            cs.add(k, h, 1.0);
            cs.add(k, v12, -1.0);
        }
        if let Some(v13) = lam13[k] {
            cs.add(k, v13, 1.0);
        }
    }
    th.add(r, lam16, 1.0);
    for i in 0..nb {
        for (v, c) in box_terms(mu6[i]) {
            vv.add(i, v, c);
        }
        if gsh[i] != 0.0 {
            vv.add(i, lam1[i], -2.0 * vop[i] * gsh[i]);
        }
        if bsh[i] != 0.0 {
            vv.add(i, lam2[i], 2.0 * vop[i] * bsh[i]);
        }
    }

    let stat_th: Vec<usize> = th
        .rows
        .into_iter()
        .enumerate()
        .map(|(i, terms)| prog.add_eq(format!("stat_th[{t},{}]", bus_id(i)), terms, 0.0))
        .collect();
    let stat_v: Vec<usize> = vv
        .rows
        .into_iter()
        .enumerate()
        .map(|(i, terms)| prog.add_eq(format!("stat_v[{t},{}]", bus_id(i)), terms, 0.0))
        .collect();
    let mut stat_p = Vec::with_capacity(2 * m);
    let mut stat_q = Vec::with_capacity(2 * m);
    for (a, arc) in arcs.iter().enumerate() {
        let mut tp = vec![(lam1[arc.from], -1.0), (lam_p[a], 1.0)];
        let mut tq = vec![(lam2[arc.from], -1.0), (lam_q[a], 1.0)];
        if let (Some(v14), Some(v15)) = (lam14[a], lam15[a]) {
            tp.push((v14, -1.0));
            tq.push((v15, -1.0));
        }
        stat_p.push(prog.add_eq(format!("stat_p[{}]", arc_name(a)), tp, 0.0));
        stat_q.push(prog.add_eq(format!("stat_q[{}]", arc_name(a)), tq, 0.0));
    }
    let gen_bus: Vec<usize> = {
        let mut gb = vec![0; ng];
        for (i, gens) in ix.gens_at.iter().enumerate() {
            for &k in gens {
                gb[k] = i;
            }
        }
        gb
    };
    let mut u = vec![None; ng];
    let mut stat_pg = vec![None; ng];
    let mut stat_qg = Vec::with_capacity(ng);
    for (k, g) in case.generators.iter().enumerate() {
        let mut terms = box_terms(mu3[k]);
        terms.push((lam1[gen_bus[k]], 1.0));
        if g.c2 > 0.0 {
            let uk = prog.free_var(format!("u[{t},{}]", g.id));
            prog.add_quad(uk, 1.0 / (4.0 * g.c2));
            terms.push((uk, -1.0));
            prog.add_eq(format!("u_def[{t},{}]", g.id), terms, -g.c1);
            u[k] = Some(uk);
        } else {
            stat_pg[k] = Some(prog.add_eq(format!("stat_pg[{t},{}]", g.id), terms, -g.c1));
        }
        let mut tq = box_terms(mu4[k]);
        tq.push((lam2[gen_bus[k]], 1.0));
        stat_qg.push(prog.add_eq(format!("stat_qg[{t},{}]", g.id), tq, 0.0));
    }
    let stat_cos: Vec<usize> = cs
        .rows
        .into_iter()
        .enumerate()
        .map(|(k, terms)| prog.add_eq(format!("stat_cos[{}]", pair_name(k)), terms, 0.0))
        .collect();
    let stat_vchk: Vec<usize> = vc
        .rows
        .into_iter()
        .enumerate()
        .map(|(k, terms)| prog.add_eq(format!("stat_vchk[{}]", branch_name(k)), terms, 0.0))
        .collect();

    Ok(DualStep {
        program: prog,
        layout: DualLayout {
            lam1,
            lam2,
            lam_p,
            lam_q,
            lam7,
            lam8,
            lam9,
            mu1,
            lam10,
            lam11,
            lam12,
            mu2,
            lam13,
            lam14,
            lam15,
            mu5,
            lam16,
            mu3,
            mu4,
            mu6,
            u,
            stat_th,
            stat_v,
            stat_p,
            stat_q,
            stat_pg,
            stat_qg,
            stat_cos,
            stat_vchk,
            soc_v,
            soc_cos,
            soc_lim,
        },
    })
}
