use log::debug;
use rayon::prelude::*;

use crate::bilevel::StorageSchedule;
use crate::linalg::{CscMatrix, LdlFactor, LdlSymbolic};
use crate::netcase::{IndexSets, NetworkCase};
use crate::physics::{ArcTerm, Network};

use super::{ExactSolution, IterRecord, OperatingPoint, OpfError, SeedPoint, StepStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpfSettings {
    pub mu0: f64,
    pub mu_factor: f64,
    pub mu_min: f64,
    /// balance and bound residual target
    pub pf_tol: f64,
    /// stationarity target on the cost-scaled Lagrangian gradient
    pub opf_tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
}

impl Default for OpfSettings {
    fn default() -> Self {
        Self {
            mu0: 1.0,
            mu_factor: 0.2,
            mu_min: 1e-9,
            pf_tol: 1e-8,
            opf_tol: 1e-6,
            max_iter: 500,
            step_fraction: 0.995,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Var(usize),
    Fixed(f64),
}

impl Slot {
    fn col(self) -> Option<usize> {
        match self {
            Slot::Var(c) => Some(c),
            Slot::Fixed(_) => None,
        }
    }

    fn value(self, x: &[f64]) -> f64 {
        match self {
            Slot::Var(c) => x[c],
            Slot::Fixed(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Ineq {
    Upper(usize, f64),
    Lower(usize, f64),
    /// `P² + Q² ≤ s²` on branch `k` of the network, one orientation
    Limit { k: usize, reverse: bool, s2: f64 },
}

struct StepModel<'a> {
    net: &'a Network<f64>,
    case: &'a NetworkCase,
    gens_at: &'a [Vec<usize>],
    v: Vec<Slot>,
    th: Vec<Slot>,
    pg: Vec<Slot>,
    qg: Vec<Slot>,
    pd: Vec<f64>,
    qd: Vec<f64>,
    nx: usize,
    ineqs: Vec<Ineq>,
    names: Vec<String>,
    scale: f64,
}

struct Eval {
    f: f64,
    grad: Vec<f64>,
    h: Vec<f64>,
    jh: Vec<Vec<f64>>,
    g: Vec<f64>,
    jg: Vec<Vec<f64>>,
}

fn slot_for(lo: f64, hi: f64, nx: &mut usize) -> Slot {
    if lo == hi {
        Slot::Fixed(lo)
    } else {
        *nx += 1;
        Slot::Var(*nx - 1)
    }
}

impl<'a> StepModel<'a> {
    fn new(
        case: &'a NetworkCase,
        ix: &'a IndexSets,
        net: &'a Network<f64>,
        t: usize,
        storage: Option<(f64, f64)>,
    ) -> Self {
        let nb = case.buses.len();
        let mut nx = 0;
        let mut v = Vec::with_capacity(nb);
        let mut th = Vec::with_capacity(nb);
        for (i, b) in case.buses.iter().enumerate() {
            v.push(slot_for(b.vmin, b.vmax, &mut nx));
            th.push(if i == ix.reference {
                Slot::Fixed(0.0)
            } else {
                slot_for(f64::NEG_INFINITY, f64::INFINITY, &mut nx)
            });
        }
        let pg: Vec<Slot> = case
            .generators
            .iter()
            .map(|g| slot_for(g.pmin, g.pmax, &mut nx))
            .collect();
        let qg: Vec<Slot> = case
            .generators
            .iter()
            .map(|g| slot_for(g.qmin, g.qmax, &mut nx))
            .collect();

        let mut ineqs = Vec::new();
        let mut names = Vec::new();
        let mut bound = |slot: Slot, lo: f64, hi: f64, name: String| {
            if let Slot::Var(c) = slot {
                if lo.is_finite() {
                    ineqs.push(Ineq::Lower(c, lo));
                    names.push(format!("{name} >= {lo}"));
                }
                if hi.is_finite() {
                    ineqs.push(Ineq::Upper(c, hi));
                    names.push(format!("{name} <= {hi}"));
                }
            }
        };
        for (i, b) in case.buses.iter().enumerate() {
            bound(v[i], b.vmin, b.vmax, format!("v[bus {}]", b.id));
        }
        for (k, g) in case.generators.iter().enumerate() {
            bound(pg[k], g.pmin, g.pmax, format!("pg[gen {}]", g.id));
            bound(qg[k], g.qmin, g.qmax, format!("qg[gen {}]", g.id));
        }
        for (k, &(b, _, _, _)) in net.branches.iter().enumerate() {
            let br = &case.branches[b];
            if br.s_max > 0.0 {
                for reverse in [false, true] {
                    ineqs.push(Ineq::Limit {
                        k,
                        reverse,
                        s2: br.s_max * br.s_max,
                    });
                    let dir = if reverse { "to" } else { "from" };
                    names.push(format!("|s|[branch {} {dir}] <= {}", br.id, br.s_max));
                }
            }
        }

        let mut pd = vec![0.0; nb];
        let mut qd = vec![0.0; nb];
        for l in &case.loads {
            let i = case.bus_position(l.bus).expect("validated load bus");
            pd[i] += l.p_d[t];
            qd[i] += l.q_d[t];
        }
        if let (Some(b), Some((p, q))) = (ix.storage_bus, storage) {
            pd[b] += p;
            qd[b] += q;
        }
        let cmax = case
            .generators
            .iter()
            .map(|g| g.c1.abs().max(g.c2))
            .fold(0.0, f64::max);
        Self {
            net,
            case,
            gens_at: &ix.gens_at,
            v,
            th,
            pg,
            qg,
            pd,
            qd,
            nx,
            ineqs,
            names,
            scale: 1.0 / cmax.max(1.0),
        }
    }

    fn values(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let get = |s: &[Slot]| s.iter().map(|s| s.value(x)).collect::<Vec<_>>();
        (get(&self.v), get(&self.th), get(&self.pg), get(&self.qg))
    }

    fn seed(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.nx];
        for (i, b) in self.case.buses.iter().enumerate() {
            if let Slot::Var(c) = self.v[i] {
                x[c] = 1.0f64.clamp(b.vmin, b.vmax);
            }
        }
        for (k, g) in self.case.generators.iter().enumerate() {
            if let Slot::Var(c) = self.pg[k] {
                x[c] = 0.5 * (g.pmin + g.pmax);
            }
            if let Slot::Var(c) = self.qg[k] {
                x[c] = 0.5 * (g.qmin + g.qmax);
            }
        }
        x
    }

    /// `(s, o, P term, Q term, network branch, reverse)` for every arc.
    fn arcs(&self) -> impl Iterator<Item = (usize, usize, ArcTerm<f64>, ArcTerm<f64>, usize, bool)> + '_ {
        self.net.branches.iter().enumerate().flat_map(|(k, &(_, i, j, ref prm))| {
            [false, true].into_iter().map(move |rev| {
                let (tp, tq) = prm.arc_terms(rev);
                let (s, o) = if rev { (j, i) } else { (i, j) };
                (s, o, tp, tq, k, rev)
            })
        })
    }

    fn cols(&self, s: usize, o: usize) -> [Option<usize>; 4] {
        [self.v[s].col(), self.v[o].col(), self.th[s].col(), self.th[o].col()]
    }

    fn evaluate(&self, x: &[f64]) -> Eval {
        let nb = self.case.buses.len();
        let nx = self.nx;
        let (v, th, pg, qg) = self.values(x);
        let mut f = 0.0;
        let mut grad = vec![0.0; nx];
        for (k, gen) in self.case.generators.iter().enumerate() {
            f += gen.c2 * pg[k] * pg[k] + gen.c1 * pg[k] + gen.c0;
            if let Some(c) = self.pg[k].col() {
                grad[c] = 2.0 * gen.c2 * pg[k] + gen.c1;
            }
        }
        let mut h = vec![0.0; 2 * nb];
        let mut jh = vec![vec![0.0; nx]; 2 * nb];
        for i in 0..nb {
            h[i] = -self.pd[i] - self.net.g_sh[i] * v[i] * v[i];
            h[nb + i] = -self.qd[i] + self.net.b_sh[i] * v[i] * v[i];
            if let Some(c) = self.v[i].col() {
                jh[i][c] -= 2.0 * self.net.g_sh[i] * v[i];
                jh[nb + i][c] += 2.0 * self.net.b_sh[i] * v[i];
            }
            for &k in &self.gens_at[i] {
                h[i] += pg[k];
                h[nb + i] += qg[k];
                if let Some(c) = self.pg[k].col() {
                    jh[i][c] += 1.0;
                }
                if let Some(c) = self.qg[k].col() {
                    jh[nb + i][c] += 1.0;
                }
            }
        }
        let mut flows = vec![(0.0, 0.0, [0.0; 4], [0.0; 4]); 2 * self.net.branches.len()];
        for (s, o, tp, tq, k, rev) in self.arcs() {
            let a = (v[s], v[o], th[s], th[o]);
            let p = tp.value(a.0, a.1, a.2, a.3);
            let q = tq.value(a.0, a.1, a.2, a.3);
            let gp = tp.gradient(a.0, a.1, a.2, a.3);
            let gq = tq.gradient(a.0, a.1, a.2, a.3);
            h[s] -= p;
            h[nb + s] -= q;
            let cols = self.cols(s, o);
            for m in 0..4 {
                if let Some(c) = cols[m] {
                    jh[s][c] -= gp[m];
                    jh[nb + s][c] -= gq[m];
                }
            }
            flows[2 * k + rev as usize] = (p, q, gp, gq);
        }
        let ni = self.ineqs.len();
        let mut g = vec![0.0; ni];
        let mut jg = vec![vec![0.0; nx]; ni];
        for (r, ineq) in self.ineqs.iter().enumerate() {
            match *ineq {
                Ineq::Upper(c, u) => {
                    g[r] = x[c] - u;
                    jg[r][c] = 1.0;
                }
                Ineq::Lower(c, l) => {
                    g[r] = l - x[c];
                    jg[r][c] = -1.0;
                }
                Ineq::Limit { k, reverse, s2 } => {
                    let (p, q, gp, gq) = flows[2 * k + reverse as usize];
                    g[r] = p * p + q * q - s2;
                    let (_, i, j, _) = self.net.branches[k];
                    let (s, o) = if reverse { (j, i) } else { (i, j) };
                    let cols = self.cols(s, o);
                    for m in 0..4 {
                        if let Some(c) = cols[m] {
                            jg[r][c] += 2.0 * (p * gp[m] + q * gq[m]);
                        }
                    }
                }
            }
        }
        Eval {
            f,
            grad,
            h,
            jh,
            g,
            jg,
        }
    }

    /// Hessian of `scale·f + λᵀh + μᵀg`.
    fn hessian(&self, x: &[f64], lam: &[f64], mu: &[f64]) -> Vec<Vec<f64>> {
        let nb = self.case.buses.len();
        let nx = self.nx;
        let (v, th, _, _) = self.values(x);
        let mut hs = vec![vec![0.0; nx]; nx];
        for (k, gen) in self.case.generators.iter().enumerate() {
            if let Some(c) = self.pg[k].col() {
                hs[c][c] += 2.0 * gen.c2 * self.scale;
            }
        }
        for i in 0..nb {
            if let Some(c) = self.v[i].col() {
                hs[c][c] += -2.0 * self.net.g_sh[i] * lam[i] + 2.0 * self.net.b_sh[i] * lam[nb + i];
            }
        }
        let mut limit_mu = vec![0.0; 2 * self.net.branches.len()];
        for (r, ineq) in self.ineqs.iter().enumerate() {
            if let Ineq::Limit { k, reverse, .. } = *ineq {
                limit_mu[2 * k + reverse as usize] = mu[r];
            }
        }
        for (s, o, tp, tq, k, rev) in self.arcs() {
            let a = (v[s], v[o], th[s], th[o]);
            let hp = tp.hessian(a.0, a.1, a.2, a.3);
            let hq = tq.hessian(a.0, a.1, a.2, a.3);
            let m_lim = limit_mu[2 * k + rev as usize];
            let (wp, wq) = (-lam[s], -lam[nb + s]);
            let (mut p, mut q, mut gp, mut gq) = (0.0, 0.0, [0.0; 4], [0.0; 4]);
            if m_lim != 0.0 {
                p = tp.value(a.0, a.1, a.2, a.3);
                q = tq.value(a.0, a.1, a.2, a.3);
                gp = tp.gradient(a.0, a.1, a.2, a.3);
                gq = tq.gradient(a.0, a.1, a.2, a.3);
            }
            let cols = self.cols(s, o);
            for m in 0..4 {
                let Some(cm) = cols[m] else { continue };
                for n in 0..4 {
                    let Some(cn) = cols[n] else { continue };
                    let mut val = wp * hp[m][n] + wq * hq[m][n];
                    if m_lim != 0.0 {
                        val += 2.0
                            * m_lim
                            * (gp[m] * gp[n] + p * hp[m][n] + gq[m] * gq[n] + q * hq[m][n]);
                    }
                    hs[cm][cn] += val;
                }
            }
        }
        hs
    }
}

struct StepResult {
    pg: Vec<f64>,
    qg: Vec<f64>,
    v: Vec<f64>,
    th: Vec<f64>,
    lam: Vec<f64>,
    limit_mu: Vec<f64>,
    cost: f64,
    stats: StepStats,
}

fn solve_kkt(hs: &[Vec<f64>], jh: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let nx = hs.len();
    let ne = jh.len();
    let n = nx + ne;
    let mut delta_w = 0.0;
    let mut delta_c = 0.0;
    for _ in 0..30 {
        let mut trip = Vec::new();
        for c in 0..nx {
            for r in 0..=c {
                let val = hs[r][c] + if r == c { delta_w } else { 0.0 };
                if val != 0.0 || r == c {
                    trip.push((r, c, val));
                }
            }
        }
        for (e, row) in jh.iter().enumerate() {
            for (c, &val) in row.iter().enumerate() {
                if val != 0.0 {
                    trip.push((c, nx + e, val));
                }
            }
            trip.push((nx + e, nx + e, -delta_c));
        }
        let upper = CscMatrix::from_triplets(n, n, &trip);
        let sym = LdlSymbolic::analyze(&upper).ok()?;
        let mut ldl = LdlFactor::new(sym);
        match ldl.factor(&upper, None, 1e-14, 0.0) {
            Ok(stats) if stats.negative == ne => {
                let mut x = rhs.to_vec();
                ldl.solve_in_place(&mut x);
                if x.iter().all(|v| v.is_finite()) {
                    return Some(x);
                }
                delta_c = if delta_c == 0.0 { 1e-10 } else { delta_c * 10.0 };
            }
            Ok(stats) if stats.negative < ne => {
                delta_c = if delta_c == 0.0 { 1e-10 } else { delta_c * 10.0 };
            }
            Ok(_) => {
                delta_w = if delta_w == 0.0 { 1e-8 } else { delta_w * 10.0 };
            }
            Err(_) => {
                delta_c = if delta_c == 0.0 { 1e-10 } else { delta_c * 10.0 };
                delta_w = if delta_w == 0.0 { 1e-8 } else { delta_w * 4.0 };
            }
        }
    }
    None
}

fn norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn solve_step(model: &StepModel, t: usize, settings: &OpfSettings) -> Result<StepResult, OpfError> {
    let nx = model.nx;
    let nb = model.case.buses.len();
    let ni = model.ineqs.len();
    let ne = 2 * nb;
    let mut x = model.seed();
    let mut mu_b = settings.mu0;
    let e0 = model.evaluate(&x);
    let mut z: Vec<f64> = e0.g.iter().map(|&g| (-g).max(0.1)).collect();
    let mut mu: Vec<f64> = z.iter().map(|&z| mu_b / z).collect();
    let mut lam = vec![0.0; ne];
    let mut history = Vec::new();

    for it in 0..=settings.max_iter {
        let ev = model.evaluate(&x);
        let mut rx: Vec<f64> = ev.grad.iter().map(|g| g * model.scale).collect();
        for (e, row) in ev.jh.iter().enumerate() {
            crate::scalar::axpy(lam[e], row, &mut rx);
        }
        for (r, row) in ev.jg.iter().enumerate() {
            crate::scalar::axpy(mu[r], row, &mut rx);
        }
        let rg: Vec<f64> = (0..ni).map(|r| ev.g[r] + z[r]).collect();
        let compl = (0..ni).map(|r| z[r] * mu[r]).fold(0.0, f64::max);
        let stat = norm(&rx);
        let pinf = norm(&ev.h).max(norm(&rg));
        history.push(IterRecord {
            iteration: it,
            barrier: mu_b,
            stationarity: stat,
            primal_infeasibility: pinf,
            complementarity: compl,
        });
        debug!("opf t={t} it={it} mu={mu_b:.1e} stat={stat:.2e} pinf={pinf:.2e} compl={compl:.2e}");
        if !(stat.is_finite() && pinf.is_finite()) {
            break;
        }
        let rc_dev = (0..ni).map(|r| (z[r] * mu[r] - mu_b).abs()).fold(0.0, f64::max);
        let inner_err = stat.max(pinf).max(rc_dev);
        if mu_b <= settings.mu_min
            && stat <= settings.opf_tol
            && pinf <= settings.pf_tol
            && compl <= 10.0 * settings.mu_min
        {
            let (v, th, pg, qg) = model.values(&x);
            let mut limit_mu = vec![0.0; 2 * model.net.branches.len()];
            for (r, ineq) in model.ineqs.iter().enumerate() {
                if let Ineq::Limit { k, reverse, .. } = *ineq {
                    limit_mu[2 * k + reverse as usize] = mu[r] / model.scale;
                }
            }
            return Ok(StepResult {
                pg,
                qg,
                v,
                th,
                lam: lam.iter().map(|l| l / model.scale).collect(),
                limit_mu,
                cost: ev.f,
                stats: StepStats {
                    iterations: it,
                    stationarity: stat,
                    balance_residual: norm(&ev.h),
                    complementarity: compl,
                    barrier: mu_b,
                },
            });
        }
        if it == settings.max_iter {
            break;
        }
        while mu_b > settings.mu_min && inner_err <= 10.0 * mu_b {
            mu_b = (mu_b * settings.mu_factor).max(settings.mu_min * 0.999);
            if mu_b <= settings.mu_min {
                break;
            }
        }

        let mut hs = model.hessian(&x, &lam, &mu);
        let mut rhs = vec![0.0; nx + ne];
        for c in 0..nx {
            rhs[c] = -rx[c];
        }
        for r in 0..ni {
            let d = mu[r] / z[r];
            let w = (z[r] * mu[r] - mu_b - mu[r] * rg[r]) / z[r];
            let row = &ev.jg[r];
            let nzc: Vec<usize> = (0..nx).filter(|&c| row[c] != 0.0).collect();
            for &a in &nzc {
                rhs[a] += row[a] * w;
                for &b in &nzc {
                    hs[a][b] += d * row[a] * row[b];
                }
            }
        }
        for e in 0..ne {
            rhs[nx + e] = -ev.h[e];
        }
        let Some(sol) = solve_kkt(&hs, &ev.jh, &rhs) else {
            return Err(OpfError::Linear { t, iteration: it });
        };
        let dx = &sol[..nx];
        let dlam = &sol[nx..];
        let mut dz = vec![0.0; ni];
        let mut dmu = vec![0.0; ni];
        for r in 0..ni {
            let jdx: f64 = ev.jg[r].iter().zip(dx).map(|(a, b)| a * b).sum();
            dz[r] = -rg[r] - jdx;
            dmu[r] = (mu_b - z[r] * mu[r] - mu[r] * dz[r]) / z[r];
        }
        let tau = settings.step_fraction.max(1.0 - mu_b);
        let max_step = |w: &[f64], dw: &[f64]| {
            w.iter()
                .zip(dw)
                .filter(|(_, d)| **d < 0.0)
                .map(|(w, d)| -tau * w / d)
                .fold(1.0, f64::min)
        };
        let ap = max_step(&z, &dz);
        let ad = max_step(&mu, &dmu);
        for c in 0..nx {
            x[c] += ap * dx[c];
        }
        for r in 0..ni {
            z[r] += ap * dz[r];
            mu[r] += ad * dmu[r];
        }
        for e in 0..ne {
            lam[e] += ad * dlam[e];
        }
    }

    let last = history.last().copied();
    if let Some(rec) = last {
        if rec.primal_infeasibility > 1e-6 || !rec.primal_infeasibility.is_finite() {
            let ev = model.evaluate(&x);
            let mut violated: Vec<(f64, String)> = ev
                .g
                .iter()
                .zip(&model.names)
                .filter(|(g, _)| **g > 1e-6)
                .map(|(g, n)| (*g, n.clone()))
                .collect();
            for (i, h) in ev.h.iter().enumerate() {
                if h.abs() > 1e-6 {
                    let kind = if i < nb { "p" } else { "q" };
                    let id = model.case.buses[i % nb].id;
                    violated.push((h.abs(), format!("{kind}-balance[bus {id}]")));
                }
            }
            violated.sort_by(|a, b| b.0.total_cmp(&a.0));
            return Err(OpfError::Infeasible {
                t,
                violated: violated.into_iter().map(|v| v.1).collect(),
            });
        }
    }
    Err(OpfError::NonConvergence { t, history })
}

/// Exact polar AC OPF for every time step, with storage injections held fixed.
pub fn solve_exact_polar_opf(
    case: &NetworkCase,
    schedule: Option<&StorageSchedule>,
    settings: &OpfSettings,
) -> Result<ExactSolution, OpfError> {
    let problems = crate::netcase::validate_case(case);
    if !problems.is_empty() {
        return Err(OpfError::Case(problems.join("; ")));
    }
    if let Some(s) = schedule {
        if s.horizon() != case.horizon {
            return Err(OpfError::Case(format!(
                "schedule covers {} steps, case has {}",
                s.horizon(),
                case.horizon
            )));
        }
        if case.storage.is_none() && !s.is_passive() {
            return Err(OpfError::Case("nonzero schedule for a case without storage".into()));
        }
    }
    let ix = IndexSets::build(case);
    let net = Network::<f64>::from_case(case, &ix);
    let pmax: f64 = case.generators.iter().map(|g| g.pmax).sum();
    for t in 0..case.horizon {
        let demand: f64 = case.loads.iter().map(|l| l.p_d[t]).sum::<f64>()
            + schedule.map_or(0.0, |s| s.p_es[t]);
        let shunt_min: f64 = case
            .shunts
            .iter()
            .map(|s| {
                let b = &case.buses[case.bus_position(s.bus).unwrap()];
                s.g_sh * if s.g_sh > 0.0 { b.vmin * b.vmin } else { b.vmax * b.vmax }
            })
            .sum();
        if demand + shunt_min > pmax {
            return Err(OpfError::Infeasible {
                t,
                violated: vec![format!(
                    "total generation capacity {pmax} below demand {}",
                    demand + shunt_min
                )],
            });
        }
    }

    let injection = |t: usize| schedule.map(|s| (s.p_es[t], s.q_es[t]));
    let steps: Vec<StepResult> = (0..case.horizon)
        .into_par_iter()
        .map(|t| {
            let model = StepModel::new(case, &ix, &net, t, injection(t));
            solve_step(&model, t, settings)
        })
        .collect::<Result<_, _>>()?;

    let seed_model = StepModel::new(case, &ix, &net, 0, None);
    let (sv, sth, spg, sqg) = seed_model.values(&seed_model.seed());
    let nb = case.buses.len();
    let mut out = ExactSolution {
        pg: Vec::new(),
        qg: Vec::new(),
        op: OperatingPoint {
            v_op: Vec::new(),
            th_op: Vec::new(),
        },
        price_p: Vec::new(),
        price_q: Vec::new(),
        objective: 0.0,
        cost: Vec::new(),
        flow_p: Vec::new(),
        flow_q: Vec::new(),
        limit_mu: Vec::new(),
        steps: Vec::new(),
        seed: SeedPoint {
            v: sv,
            th: sth,
            pg: spg,
            qg: sqg,
        },
    };
    let m = net.branches.len();
    for s in steps {
        let (fp, fq) = net.arc_flows(&s.v, &s.th);
        let mut lim = vec![0.0; 2 * m];
        for k in 0..m {
            lim[k] = s.limit_mu[2 * k];
            lim[m + k] = s.limit_mu[2 * k + 1];
        }
        out.price_p.push(s.lam[..nb].iter().map(|l| -l).collect());
        out.price_q.push(s.lam[nb..].iter().map(|l| -l).collect());
        out.objective += s.cost;
        out.cost.push(s.cost);
        out.pg.push(s.pg);
        out.qg.push(s.qg);
        out.op.v_op.push(s.v);
        out.op.th_op.push(s.th);
        out.flow_p.push(fp);
        out.flow_q.push(fq);
        out.limit_mu.push(lim);
        out.steps.push(s.stats);
    }
    Ok(out)
}
