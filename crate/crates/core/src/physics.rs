//! Exact π-model branch flows and their derivatives.

use serde::Serialize;

use crate::netcase::{Branch, IndexSets, NetworkCase};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchParams<T> {
    pub g: T,
    pub b: T,
    pub g_fr: T,
    pub b_fr: T,
    pub g_to: T,
    pub b_to: T,
    pub tau: T,
    pub sigma: T,
}

impl<T: Scalar> BranchParams<T> {
    pub fn from_branch(br: &Branch) -> Self {
        let c = T::lit;
        Self {
            g: c(br.g),
            b: c(br.b),
            g_fr: c(br.g_fr),
            b_fr: c(br.b_fr),
            g_to: c(br.g_to),
            b_to: c(br.b_to),
            tau: c(br.tau),
            sigma: c(br.sigma),
        }
    }

    /// `(P, Q)` terms seen from one end: `a·vs² + vs·vo·(α cos φ + β sin φ)`
    /// with `φ = θs − θo + shift`.
    pub fn arc_terms(&self, reverse: bool) -> (ArcTerm<T>, ArcTerm<T>) {
        let t = self.tau;
        let (gs, bs, scale, shift) = if reverse {
            (self.g_to, self.b_to, T::one(), self.sigma)
        } else {
            (self.g_fr, self.b_fr, t * t, -self.sigma)
        };
        (
            ArcTerm {
                a: (self.g + gs) / scale,
                alpha: -self.g / t,
                beta: -self.b / t,
                shift,
            },
            ArcTerm {
                a: -(self.b + bs) / scale,
                alpha: self.b / t,
                beta: -self.g / t,
                shift,
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcTerm<T> {
    pub a: T,
    pub alpha: T,
    pub beta: T,
    pub shift: T,
}

impl<T: Scalar> ArcTerm<T> {
    pub fn value(&self, vs: T, vo: T, ts: T, to: T) -> T {
        let phi = ts - to + self.shift;
        self.a * vs * vs + vs * vo * (self.alpha * phi.cos() + self.beta * phi.sin())
    }

    /// Gradient with respect to `(vs, vo, θs, θo)`.
    pub fn gradient(&self, vs: T, vo: T, ts: T, to: T) -> [T; 4] {
        let phi = ts - to + self.shift;
        let (s, c) = phi.sin_cos();
        let h = self.alpha * c + self.beta * s;
        let hp = -self.alpha * s + self.beta * c;
        let two = T::lit(2.0);
        [two * self.a * vs + vo * h, vs * h, vs * vo * hp, -vs * vo * hp]
    }

    /// Hessian with respect to `(vs, vo, θs, θo)`, row-major.
    pub fn hessian(&self, vs: T, vo: T, ts: T, to: T) -> [[T; 4]; 4] {
        let phi = ts - to + self.shift;
        let (s, c) = phi.sin_cos();
        let h = self.alpha * c + self.beta * s;
        let hp = -self.alpha * s + self.beta * c;
        let two = T::lit(2.0);
        let vv = vs * vo;
        [
            [two * self.a, h, vo * hp, -vo * hp],
            [h, T::zero(), vs * hp, -vs * hp],
            [vo * hp, vs * hp, -vv * h, vv * h],
            [-vo * hp, -vs * hp, vv * h, -vv * h],
        ]
    }
}

/// Exact `(P, Q)` leaving bus `from` of the arc.
pub fn arc_flow<T: Scalar>(p: &BranchParams<T>, reverse: bool, vs: T, vo: T, ts: T, to: T) -> (T, T) {
    let (tp, tq) = p.arc_terms(reverse);
    (tp.value(vs, vo, ts, to), tq.value(vs, vo, ts, to))
}

/// Network data needed to evaluate exact bus balances.
#[derive(Debug, Clone)]
pub struct Network<T> {
    pub nbus: usize,
    /// `(branch index, from, to, params)` for each branch in forward orientation
    pub branches: Vec<(usize, usize, usize, BranchParams<T>)>,
    pub g_sh: Vec<T>,
    pub b_sh: Vec<T>,
}

impl<T: Scalar> Network<T> {
    pub fn from_case(case: &NetworkCase, ix: &IndexSets) -> Self {
        let nbus = case.buses.len();
        let branches = ix
            .forward
            .iter()
            .map(|a| (a.branch, a.from, a.to, BranchParams::from_branch(&case.branches[a.branch])))
            .collect();
        let mut g_sh = vec![T::zero(); nbus];
        let mut b_sh = vec![T::zero(); nbus];
        for (i, shunts) in ix.shunts_at.iter().enumerate() {
            for &s in shunts {
                g_sh[i] += T::lit(case.shunts[s].g_sh);
                b_sh[i] += T::lit(case.shunts[s].b_sh);
            }
        }
        Self {
            nbus,
            branches,
            g_sh,
            b_sh,
        }
    }

    /// Active and reactive power leaving each bus through branches and shunts.
    pub fn withdrawals(&self, v: &[T], th: &[T]) -> (Vec<T>, Vec<T>) {
        let mut p = vec![T::zero(); self.nbus];
        let mut q = vec![T::zero(); self.nbus];
        for i in 0..self.nbus {
            p[i] = self.g_sh[i] * v[i] * v[i];
            q[i] = -self.b_sh[i] * v[i] * v[i];
        }
        for &(_, i, j, ref prm) in &self.branches {
            let (pf, qf) = arc_flow(prm, false, v[i], v[j], th[i], th[j]);
            let (pt, qt) = arc_flow(prm, true, v[j], v[i], th[j], th[i]);
            p[i] += pf;
            q[i] += qf;
            p[j] += pt;
            q[j] += qt;
        }
        (p, q)
    }

    /// Arc flows ordered forward arcs then reverse arcs.
    pub fn arc_flows(&self, v: &[T], th: &[T]) -> (Vec<T>, Vec<T>) {
        let m = self.branches.len();
        let mut p = vec![T::zero(); 2 * m];
        let mut q = vec![T::zero(); 2 * m];
        for (k, &(_, i, j, ref prm)) in self.branches.iter().enumerate() {
            let (pf, qf) = arc_flow(prm, false, v[i], v[j], th[i], th[j]);
            let (pt, qt) = arc_flow(prm, true, v[j], v[i], th[j], th[i]);
            p[k] = pf;
            q[k] = qf;
            p[m + k] = pt;
            q[m + k] = qt;
        }
        (p, q)
    }
}
