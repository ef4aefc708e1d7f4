use crate::linalg::LuFactor;
use crate::netcase::{IndexSets, NetworkCase};
use crate::physics::Network;
use crate::scalar::{norm_inf, Scalar};

use super::PfError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

/// Specified bus quantities for a power-flow solve.
#[derive(Debug, Clone)]
pub struct PfInjections<T> {
    pub kind: Vec<BusKind>,
    /// net active injection (generation minus demand); ignored at the slack
    pub p: Vec<T>,
    /// net reactive injection; used at PQ buses only
    pub q: Vec<T>,
    /// voltage magnitude at slack and PV buses
    pub v_set: Vec<T>,
}

impl PfInjections<f64> {
    /// Reference bus is the slack, other generator buses are PV, the rest PQ.
    ///
    /// `pg` is per generator; `v_set` per bus (only read at slack/PV buses);
    /// `storage` is the `(p_es, q_es)` withdrawal at the storage bus.
    pub fn from_dispatch(
        case: &NetworkCase,
        ix: &IndexSets,
        t: usize,
        pg: &[f64],
        v_set: &[f64],
        storage: Option<(f64, f64)>,
    ) -> Self {
        let n = case.buses.len();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        let mut kind = vec![BusKind::Pq; n];
        for (i, gens) in ix.gens_at.iter().enumerate() {
            if !gens.is_empty() {
                kind[i] = BusKind::Pv;
            }
            for &k in gens {
                p[i] += pg[k];
            }
            for &l in &ix.loads_at[i] {
                p[i] -= case.loads[l].p_d[t];
                q[i] -= case.loads[l].q_d[t];
            }
        }
        kind[ix.reference] = BusKind::Slack;
        if let (Some(b), Some((pe, qe))) = (ix.storage_bus, storage) {
            p[b] -= pe;
            q[b] -= qe;
        }
        Self {
            kind,
            p,
            q,
            v_set: v_set.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonSettings<T> {
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for NewtonSettings<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-8),
            max_iter: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PfSolution<T> {
    pub v: Vec<T>,
    pub th: Vec<T>,
    pub iterations: usize,
    /// max mismatch before each iteration and after the last one
    pub mismatch_history: Vec<T>,
}

/// Active and reactive mismatch at every bus (withdrawals minus specified injection).
pub fn mismatch<T: Scalar>(net: &Network<T>, inj: &PfInjections<T>, v: &[T], th: &[T]) -> (Vec<T>, Vec<T>) {
    let (mut p, mut q) = net.withdrawals(v, th);
    for i in 0..net.nbus {
        p[i] -= inj.p[i];
        q[i] -= inj.q[i];
    }
    (p, q)
}

/// Polar Newton-Raphson power flow.
pub fn newton_power_flow<T: Scalar>(
    net: &Network<T>,
    inj: &PfInjections<T>,
    warm: Option<(&[T], &[T])>,
    settings: &NewtonSettings<T>,
) -> Result<PfSolution<T>, PfError> {
    let n = net.nbus;
    let slack = inj
        .kind
        .iter()
        .position(|k| *k == BusKind::Slack)
        .ok_or(PfError::NoSlack)?;
    let (mut v, mut th) = match warm {
        Some((v, th)) => (v.to_vec(), th.to_vec()),
        None => (vec![T::one(); n], vec![T::zero(); n]),
    };
    for i in 0..n {
        if inj.kind[i] != BusKind::Pq {
            v[i] = inj.v_set[i];
        }
    }
    th[slack] = T::zero();

    // unknown numbering: θ at non-slack buses, then v at PQ buses
    let mut th_col = vec![None; n];
    let mut v_col = vec![None; n];
    let mut m = 0;
    for i in 0..n {
        if i != slack {
            th_col[i] = Some(m);
            m += 1;
        }
    }
    for i in 0..n {
        if inj.kind[i] == BusKind::Pq {
            v_col[i] = Some(m);
            m += 1;
        }
    }
    // equation numbering: P at non-slack, Q at PQ
    let p_row = th_col.clone();
    let q_row = v_col.clone();

    let residual = |v: &[T], th: &[T]| {
        let (dp, dq) = mismatch(net, inj, v, th);
        let mut f = vec![T::zero(); m];
        for i in 0..n {
            if let Some(r) = p_row[i] {
                f[r] = dp[i];
            }
            if let Some(r) = q_row[i] {
                f[r] = dq[i];
            }
        }
        f
    };

    let mut f = residual(&v, &th);
    let mut history = vec![norm_inf(&f)];
    for it in 0..=settings.max_iter {
        let err = *history.last().unwrap();
        if !err.is_finite() {
            return Err(PfError::Diverged {
                iterations: it,
                mismatch: err.to_f64_lossy(),
            });
        }
        if err <= settings.tol {
            return Ok(PfSolution {
                v,
                th,
                iterations: it,
                mismatch_history: history,
            });
        }
        if it == settings.max_iter {
            break;
        }
        let mut jac = vec![T::zero(); m * m];
        let mut add = |row: Option<usize>, col: Option<usize>, val: T| {
            if let (Some(r), Some(c)) = (row, col) {
                jac[r * m + c] += val;
            }
        };
        for i in 0..n {
            let d = T::lit(2.0) * v[i];
            add(p_row[i], v_col[i], net.g_sh[i] * d);
            add(q_row[i], v_col[i], -net.b_sh[i] * d);
        }
        for &(_, i, j, ref prm) in &net.branches {
            for reverse in [false, true] {
                let (s, o) = if reverse { (j, i) } else { (i, j) };
                let (tp, tq) = prm.arc_terms(reverse);
                let cols = [v_col[s], v_col[o], th_col[s], th_col[o]];
                for (row, term) in [(p_row[s], tp), (q_row[s], tq)] {
                    let g = term.gradient(v[s], v[o], th[s], th[o]);
                    for k in 0..4 {
                        add(row, cols[k], g[k]);
                    }
                }
            }
        }
        let lu = LuFactor::new(m, jac).map_err(|_| PfError::SingularJacobian { iteration: it })?;
        let dx = lu.solve(&f);
        for i in 0..n {
            if let Some(c) = th_col[i] {
                th[i] -= dx[c];
            }
            if let Some(c) = v_col[i] {
                v[i] -= dx[c];
            }
        }
        f = residual(&v, &th);
        history.push(norm_inf(&f));
    }
    Err(PfError::Diverged {
        iterations: settings.max_iter,
        mismatch: history.last().unwrap().to_f64_lossy(),
    })
}
