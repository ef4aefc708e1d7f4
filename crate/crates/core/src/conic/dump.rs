//! Plain-text program format for cross-checking with external solvers.
//!
//! ```text
//! conic 1
//! vars <n>
//! <name> <lower|-inf> <upper|inf> <quad> <linear>
//! constant <c>
//! eqs <m>
//! <name> <rhs> <k> <var>:<coef> ...
//! socs <q>
//! <name> <k> <head> <tail> ...
//! ```
//! The objective is `Σ quad·x² + Σ linear·x + constant`; names contain no whitespace.

use std::fmt::Write as _;

use super::{ConicProgram, LinearRow, ProgramError, SocBlock, Variable};
use crate::scalar::Scalar;

fn bound<T: Scalar>(b: Option<T>, inf: &str) -> String {
    b.map_or_else(|| inf.to_string(), |v| format!("{:e}", v.to_f64_lossy()))
}

pub fn dump_program<T: Scalar>(p: &ConicProgram<T>) -> String {
    let mut out = String::new();
    let f = |v: T| format!("{:e}", v.to_f64_lossy());
    writeln!(out, "conic 1").unwrap();
    writeln!(out, "vars {}", p.vars.len()).unwrap();
    for (j, v) in p.vars.iter().enumerate() {
        writeln!(
            out,
            "{} {} {} {} {}",
            v.name,
            bound(v.lower, "-inf"),
            bound(v.upper, "inf"),
            f(p.quad[j]),
            f(p.linear[j])
        )
        .unwrap();
    }
    writeln!(out, "constant {}", f(p.constant)).unwrap();
    writeln!(out, "eqs {}", p.eqs.len()).unwrap();
    for r in &p.eqs {
        write!(out, "{} {} {}", r.name, f(r.rhs), r.terms.len()).unwrap();
        for &(j, a) in &r.terms {
            write!(out, " {}:{}", j, f(a)).unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "socs {}", p.socs.len()).unwrap();
    for c in &p.socs {
        write!(out, "{} {}", c.name, c.vars.len()).unwrap();
        for &j in &c.vars {
            write!(out, " {j}").unwrap();
        }
        out.push('\n');
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_tokens(&mut self) -> Result<Vec<&'a str>, ProgramError> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            if !l.trim().is_empty() {
                return Ok(l.split_whitespace().collect());
            }
        }
        Err(self.err("unexpected end of input"))
    }

    fn err(&self, msg: impl Into<String>) -> ProgramError {
        ProgramError::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn header(&mut self, key: &str) -> Result<usize, ProgramError> {
        let t = self.next_tokens()?;
        if t.len() != 2 || t[0] != key {
            return Err(self.err(format!("expected `{key} <count>`")));
        }
        t[1].parse().map_err(|_| self.err("bad count"))
    }

    fn num<T: Scalar>(&self, s: &str) -> Result<T, ProgramError> {
        let v: f64 = s.parse().map_err(|_| self.err(format!("bad number `{s}`")))?;
        Ok(T::lit(v))
    }

    fn idx(&self, s: &str) -> Result<usize, ProgramError> {
        s.parse().map_err(|_| self.err(format!("bad index `{s}`")))
    }
}

pub fn parse_program<T: Scalar>(text: &str) -> Result<ConicProgram<T>, ProgramError> {
    let mut l = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let t = l.next_tokens()?;
    if t != ["conic", "1"] {
        return Err(l.err("missing `conic 1` header"));
    }
    let mut p = ConicProgram::new();
    let nv = l.header("vars")?;
    for _ in 0..nv {
        let t = l.next_tokens()?;
        if t.len() != 5 {
            return Err(l.err("variable line needs 5 fields"));
        }
        let lower = if t[1] == "-inf" { None } else { Some(l.num(t[1])?) };
        let upper = if t[2] == "inf" { None } else { Some(l.num(t[2])?) };
        p.vars.push(Variable {
            name: t[0].to_string(),
            lower,
            upper,
        });
        p.quad.push(l.num(t[3])?);
        p.linear.push(l.num(t[4])?);
    }
    let t = l.next_tokens()?;
    if t.len() != 2 || t[0] != "constant" {
        return Err(l.err("expected `constant <value>`"));
    }
    p.constant = l.num(t[1])?;
    let ne = l.header("eqs")?;
    for _ in 0..ne {
        let t = l.next_tokens()?;
        if t.len() < 3 {
            return Err(l.err("equality line too short"));
        }
        let k = l.idx(t[2])?;
        if t.len() != 3 + k {
            return Err(l.err("term count mismatch"));
        }
        let mut terms = Vec::with_capacity(k);
        for tok in &t[3..] {
            let (j, a) = tok.split_once(':').ok_or_else(|| l.err("term must be var:coef"))?;
            terms.push((l.idx(j)?, l.num(a)?));
        }
        p.eqs.push(LinearRow {
            name: t[0].to_string(),
            terms,
            rhs: l.num(t[1])?,
        });
    }
    let nc = l.header("socs")?;
    for _ in 0..nc {
        let t = l.next_tokens()?;
        if t.len() < 2 {
            return Err(l.err("cone line too short"));
        }
        let k = l.idx(t[1])?;
        if t.len() != 2 + k {
            return Err(l.err("member count mismatch"));
        }
        let vars = t[2..].iter().map(|s| l.idx(s)).collect::<Result<_, _>>()?;
        p.socs.push(SocBlock {
            name: t[0].to_string(),
            vars,
        });
    }
    p.validate()?;
    Ok(p)
}
