use serde::{Deserialize, Serialize};

use super::cones::norm2;
use super::{ConicProgram, SolveResult};
use crate::scalar::Scalar;

/// ∞-norm residuals of the KKT conditions at a primal-dual point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport<T> {
    pub stationarity: T,
    pub primal_feasibility: T,
    pub dual_feasibility: T,
    pub complementarity: T,
}

impl<T: Scalar> KktReport<T> {
    pub fn max(&self) -> T {
        self.stationarity
            .max(self.primal_feasibility)
            .max(self.dual_feasibility)
            .max(self.complementarity)
    }
}

pub fn check_kkt<T: Scalar>(program: &ConicProgram<T>, result: &SolveResult<T>) -> KktReport<T> {
    let x = &result.x;
    let mut grad = program.gradient(x);
    for (r, row) in program.eqs.iter().enumerate() {
        let y = result.eq_multipliers[r];
        for &(j, a) in &row.terms {
            grad[j] += a * y;
        }
    }
    let zero = T::zero();
    let mut primal = zero;
    let mut dual = zero;
    let mut comp = zero;
    for (j, v) in program.vars.iter().enumerate() {
        let (ml, mu) = (result.lower_multipliers[j], result.upper_multipliers[j]);
        grad[j] += mu - ml;
        dual = dual.max(-ml).max(-mu);
        match v.lower {
            Some(l) => {
                primal = primal.max(l - x[j]);
                comp = comp.max((ml * (x[j] - l)).abs());
            }
            None => dual = dual.max(ml.abs()),
        }
        match v.upper {
            Some(u) => {
                primal = primal.max(x[j] - u);
                comp = comp.max((mu * (u - x[j])).abs());
            }
            None => dual = dual.max(mu.abs()),
        }
    }
    for (r, row) in program.eqs.iter().enumerate() {
        primal = primal.max((program.row_value(r, x) - row.rhs).abs());
    }
    for (k, c) in program.socs.iter().enumerate() {
        let z = &result.cone_multipliers[k];
        let xs: Vec<T> = c.vars.iter().map(|&j| x[j]).collect();
        for (m, &j) in c.vars.iter().enumerate() {
            grad[j] -= z[m];
        }
        primal = primal.max(norm2(&xs[1..]) - xs[0]);
        dual = dual.max(norm2(&z[1..]) - z[0]);
        comp = comp.max(crate::scalar::dot(&xs, z).abs());
    }
    KktReport {
        stationarity: crate::scalar::norm_inf(&grad),
        primal_feasibility: primal.max(zero),
        dual_feasibility: dual.max(zero),
        complementarity: comp,
    }
}
