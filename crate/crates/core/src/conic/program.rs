use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ProgramError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable<T> {
    pub name: String,
    pub lower: Option<T>,
    pub upper: Option<T>,
}

/// Sparse equality row `Σ coef·x[var] = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRow<T> {
    pub name: String,
    pub terms: Vec<(usize, T)>,
    pub rhs: T,
}

/// `‖(x[vars[1]], …)‖₂ ≤ x[vars[0]]`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocBlock {
    pub name: String,
    pub vars: Vec<usize>,
}

impl SocBlock {
    pub fn head(&self) -> usize {
        self.vars[0]
    }
}

/// Minimize `Σ quad[j]·x[j]² + Σ linear[j]·x[j] + constant` over equalities,
/// bounds and second-order cones.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConicProgram<T> {
    pub vars: Vec<Variable<T>>,
    pub quad: Vec<T>,
    pub linear: Vec<T>,
    pub constant: T,
    pub eqs: Vec<LinearRow<T>>,
    pub socs: Vec<SocBlock>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyCount {
    pub vars: usize,
    pub eqs: usize,
    pub socs: usize,
}

/// Family of a name such as `bal_p[t0,b3]` is the part before the bracket.
pub fn family_of(name: &str) -> &str {
    name.split('[').next().unwrap_or(name)
}

impl<T: Scalar> ConicProgram<T> {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            quad: Vec::new(),
            linear: Vec::new(),
            constant: T::zero(),
            eqs: Vec::new(),
            socs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: Option<T>, upper: Option<T>) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.quad.push(T::zero());
        self.linear.push(T::zero());
        self.vars.len() - 1
    }

    pub fn free_var(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, None, None)
    }

    pub fn add_quad(&mut self, var: usize, coef: T) {
        self.quad[var] += coef;
    }

    pub fn add_linear(&mut self, var: usize, coef: T) {
        self.linear[var] += coef;
    }

    pub fn add_eq(&mut self, name: impl Into<String>, terms: Vec<(usize, T)>, rhs: T) -> usize {
        self.eqs.push(LinearRow {
            name: name.into(),
            terms,
            rhs,
        });
        self.eqs.len() - 1
    }

    pub fn add_soc(&mut self, name: impl Into<String>, vars: Vec<usize>) -> usize {
        self.socs.push(SocBlock {
            name: name.into(),
            vars,
        });
        self.socs.len() - 1
    }

    pub fn objective(&self, x: &[T]) -> T {
        let mut f = self.constant;
        for j in 0..self.vars.len() {
            f += self.quad[j] * x[j] * x[j] + self.linear[j] * x[j];
        }
        f
    }

    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let two = T::lit(2.0);
        (0..self.vars.len())
            .map(|j| two * self.quad[j] * x[j] + self.linear[j])
            .collect()
    }

    pub fn row_value(&self, row: usize, x: &[T]) -> T {
        self.eqs[row].terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Multiplies objective terms by `factor`.
    pub fn scale_objective(&mut self, factor: T) {
        self.quad.iter_mut().for_each(|q| *q *= factor);
        self.linear.iter_mut().for_each(|c| *c *= factor);
        self.constant *= factor;
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn eq_index(&self, name: &str) -> Option<usize> {
        self.eqs.iter().position(|r| r.name == name)
    }

    pub fn soc_index(&self, name: &str) -> Option<usize> {
        self.socs.iter().position(|c| c.name == name)
    }

    /// Counts of variables, equalities and cones keyed by name family.
    pub fn census(&self) -> BTreeMap<String, FamilyCount> {
        let mut out: BTreeMap<String, FamilyCount> = BTreeMap::new();
        for v in &self.vars {
            out.entry(family_of(&v.name).to_string()).or_default().vars += 1;
        }
        for r in &self.eqs {
            out.entry(family_of(&r.name).to_string()).or_default().eqs += 1;
        }
        for c in &self.socs {
            out.entry(family_of(&c.name).to_string()).or_default().socs += 1;
        }
        out
    }

    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.vars.len();
        if self.quad.len() != n || self.linear.len() != n {
            return Err(ProgramError::Dimension(format!(
                "{} variables but {} quadratic and {} linear coefficients",
                n,
                self.quad.len(),
                self.linear.len()
            )));
        }
        for (j, v) in self.vars.iter().enumerate() {
            if !self.quad[j].is_finite() || !self.linear[j].is_finite() {
                return Err(ProgramError::NonFinite(v.name.clone()));
            }
            if self.quad[j] < T::zero() {
                return Err(ProgramError::NonConvex(v.name.clone()));
            }
            if let (Some(l), Some(u)) = (v.lower, v.upper) {
                if l > u {
                    return Err(ProgramError::EmptyBox(v.name.clone()));
                }
            }
            if v.lower.is_some_and(|l| !l.is_finite()) || v.upper.is_some_and(|u| !u.is_finite()) {
                return Err(ProgramError::NonFinite(v.name.clone()));
            }
        }
        if !self.constant.is_finite() {
            return Err(ProgramError::NonFinite("constant".into()));
        }
        for r in &self.eqs {
            if !r.rhs.is_finite() {
                return Err(ProgramError::NonFinite(r.name.clone()));
            }
            for &(j, a) in &r.terms {
                if j >= n {
                    return Err(ProgramError::UnknownVariable(r.name.clone(), j));
                }
                if !a.is_finite() {
                    return Err(ProgramError::NonFinite(r.name.clone()));
                }
            }
        }
        let mut head_seen = vec![false; n];
        for c in &self.socs {
            if c.vars.len() < 2 {
                return Err(ProgramError::Cone(format!("{} has fewer than two members", c.name)));
            }
            for (k, &j) in c.vars.iter().enumerate() {
                if j >= n {
                    return Err(ProgramError::UnknownVariable(c.name.clone(), j));
                }
                if c.vars[..k].contains(&j) {
                    return Err(ProgramError::Cone(format!("{} repeats a member", c.name)));
                }
            }
            let h = c.head();
            if head_seen[h] {
                return Err(ProgramError::Cone(format!(
                    "{} is the head of more than one cone",
                    self.vars[h].name
                )));
            }
            head_seen[h] = true;
        }
        Ok(())
    }

    /// Stacks independent programs; returns the variable, equality and cone offsets of each part.
    pub fn block_diagonal(parts: &[ConicProgram<T>]) -> (Self, Vec<(usize, usize, usize)>) {
        let mut out = Self::new();
        let mut offsets = Vec::with_capacity(parts.len());
        for p in parts {
            let (v0, e0, c0) = (out.vars.len(), out.eqs.len(), out.socs.len());
            offsets.push((v0, e0, c0));
            out.vars.extend(p.vars.iter().cloned());
            out.quad.extend_from_slice(&p.quad);
            out.linear.extend_from_slice(&p.linear);
            out.constant += p.constant;
            out.eqs.extend(p.eqs.iter().map(|r| LinearRow {
                name: r.name.clone(),
                terms: r.terms.iter().map(|&(j, a)| (j + v0, a)).collect(),
                rhs: r.rhs,
            }));
            out.socs.extend(p.socs.iter().map(|c| SocBlock {
                name: c.name.clone(),
                vars: c.vars.iter().map(|&j| j + v0).collect(),
            }));
        }
        (out, offsets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_bad_programs() {
        let mut p = ConicProgram::<f64>::new();
        let x = p.add_var("x[0]", Some(1.0), Some(0.0));
        assert!(matches!(p.validate(), Err(ProgramError::EmptyBox(_))));
        p.vars[x].upper = None;
        p.add_quad(x, -1.0);
        assert!(matches!(p.validate(), Err(ProgramError::NonConvex(_))));
        p.quad[x] = 1.0;
        let y = p.free_var("y[0]");
        p.add_soc("c[0]", vec![x, y]);
        p.add_soc("c[1]", vec![x, y]);
        assert!(matches!(p.validate(), Err(ProgramError::Cone(_))));
        p.socs.pop();
        assert!(p.validate().is_ok());
        let census = p.census();
        assert_eq!(census["x"].vars, 1);
        assert_eq!(census["c"].socs, 1);
    }

    #[test]
    fn block_diagonal_offsets() {
        let mut a = ConicProgram::<f64>::new();
        let x = a.free_var("x");
        a.add_eq("r", vec![(x, 1.0)], 2.0);
        a.constant = 1.0;
        let (p, off) = ConicProgram::block_diagonal(&[a.clone(), a]);
        assert_eq!(off, vec![(0, 0, 0), (1, 1, 0)]);
        assert_eq!(p.eqs[1].terms, vec![(1, 1.0)]);
        assert_eq!(p.constant, 2.0);
    }
}
