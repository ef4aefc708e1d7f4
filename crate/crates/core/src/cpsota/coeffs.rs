use log::warn;
use serde::{Deserialize, Serialize};

use crate::netcase::{IndexSets, NetworkCase};
use crate::pfexact::OperatingPoint;
use crate::scalar::Scalar;

/// `(cps, cms)` for one orientation; `shift` is `−σ` forward and `+σ` reverse.
pub fn cps_cms<T: Scalar>(g: T, b: T, th_i: T, th_j: T, shift: T) -> (T, T) {
    let (s, c) = (th_i - th_j + shift).sin_cos();
    (g * c + b * s, b * c - g * s)
}

/// Voltage-cone coefficients `(p1, p2, p3)` such that
/// `(p1·x − p2·y)² + (p3·x)² = (g+g_fr)x²/τ² − 2g·cos(φ)xy/τ + (g+g_to)y²`.
/// `None` when a radicand is not positive.
pub fn voltage_cone_coeffs<T: Scalar>(g: T, g_fr: T, g_to: T, tau: T, phi: T) -> Option<(T, T, T)> {
    let d = g + g_to;
    if !(d > T::zero()) {
        return None;
    }
    let p2 = d.sqrt();
    let (s, c) = phi.sin_cos();
    let p1 = g * c / (tau * p2);
    let rad = (g * g * s * s + g * (g_fr + g_to) + g_fr * g_to) / (tau * tau * d);
    if !(rad >= T::zero()) {
        return None;
    }
    Some((p1, p2, rad.sqrt()))
}

/// Operating-point coefficients per time step; per-arc vectors list forward arcs then reverse arcs,
/// `p1/p2/p3` are indexed by forward arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedCoeffs {
    pub cps: Vec<Vec<f64>>,
    pub cms: Vec<Vec<f64>>,
    pub p1: Vec<Vec<Option<f64>>>,
    pub p2: Vec<Vec<Option<f64>>>,
    pub p3: Vec<Vec<Option<f64>>>,
}

impl DerivedCoeffs {
    pub fn voltage_cone_defined(&self, t: usize, k: usize) -> bool {
        self.p1[t][k].is_some() && self.p2[t][k].is_some() && self.p3[t][k].is_some()
    }
}

pub fn compute_operating_coeffs(case: &NetworkCase, ix: &IndexSets, op: &OperatingPoint) -> DerivedCoeffs {
    let horizon = op.v_op.len();
    let m = ix.forward.len();
    let mut out = DerivedCoeffs {
        cps: Vec::with_capacity(horizon),
        cms: Vec::with_capacity(horizon),
        p1: Vec::with_capacity(horizon),
        p2: Vec::with_capacity(horizon),
        p3: Vec::with_capacity(horizon),
    };
    for t in 0..horizon {
        let th = &op.th_op[t];
        let mut cps = vec![0.0; 2 * m];
        let mut cms = vec![0.0; 2 * m];
        let mut p1 = vec![None; m];
        let mut p2 = vec![None; m];
        let mut p3 = vec![None; m];
        for (k, arc) in ix.forward.iter().enumerate() {
            let br = &case.branches[arc.branch];
            let (i, j) = (arc.from, arc.to);
            (cps[k], cms[k]) = cps_cms(br.g, br.b, th[i], th[j], -br.sigma);
            (cps[m + k], cms[m + k]) = cps_cms(br.g, br.b, th[j], th[i], br.sigma);
            match voltage_cone_coeffs(br.g, br.g_fr, br.g_to, br.tau, th[i] - th[j] - br.sigma) {
                Some((a, b, c)) => {
                    p1[k] = Some(a);
                    p2[k] = Some(b);
                    p3[k] = Some(c);
                }
                None => warn!("branch {}: voltage cone coefficients undefined at t={t}", br.id),
            }
        }
        out.cps.push(cps);
        out.cms.push(cms);
        out.p1.push(p1);
        out.p2.push(p2);
        out.p3.push(p3);
    }
    out
}
