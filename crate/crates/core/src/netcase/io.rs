use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{validate_case, Branch, Bus, CaseError, Generator, Load, NetworkCase, Shunt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormat {
    NativeJson,
    MatpowerSubset,
}

impl CaseFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("m") => Self::MatpowerSubset,
            _ => Self::NativeJson,
        }
    }
}

fn read(path: &Path) -> Result<String, CaseError> {
    fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads and validates a case.
pub fn load_case(path: &Path, format: CaseFormat) -> Result<NetworkCase, CaseError> {
    let text = read(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("case");
    let case = match format {
        CaseFormat::NativeJson => read_case_json(&text, &path.display().to_string())?,
        CaseFormat::MatpowerSubset => parse_matpower(&text, name, &path.display().to_string())?,
    };
    let violations = validate_case(&case);
    if violations.is_empty() {
        Ok(case)
    } else {
        Err(CaseError::Invalid(violations))
    }
}

pub fn read_case_json(text: &str, origin: &str) -> Result<NetworkCase, CaseError> {
    serde_json::from_str(text).map_err(|e| CaseError::Parse {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })
}

pub fn save_case_json(case: &NetworkCase, path: &Path) -> Result<(), CaseError> {
    let text = serde_json::to_string_pretty(case).expect("case serializes");
    fs::write(path, text).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })
}

struct Matrix {
    rows: Vec<Vec<f64>>,
    line: usize,
}

fn strip_comments(text: &str) -> String {
    text.lines()
        .map(|l| l.split('%').next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte].matches('\n').count() + 1
}

fn parse_assignments(
    text: &str,
    origin: &str,
) -> Result<(BTreeMap<String, f64>, BTreeMap<String, Matrix>), CaseError> {
    let err = |byte: usize, msg: String| CaseError::Parse {
        path: origin.to_string(),
        line: line_of(text, byte),
        column: 0,
        msg,
    };
    let mut scalars = BTreeMap::new();
    let mut matrices = BTreeMap::new();
    let mut pos = 0;
    while let Some(found) = text[pos..].find("mpc.") {
        let start = pos + found + 4;
        let eq = text[start..]
            .find('=')
            .map(|k| start + k)
            .ok_or_else(|| err(start, "expected `=` after field name".into()))?;
        let name = text[start..eq].trim().to_string();
        let rest = text[eq + 1..].trim_start();
        let vstart = text.len() - rest.len();
        if let Some(body) = rest.strip_prefix('[') {
            let close = body
                .find(']')
                .ok_or_else(|| err(vstart, format!("unterminated matrix `{name}`")))?;
            let mut rows = Vec::new();
            let mut off = vstart + 1;
            for chunk in body[..close].split([';', '\n']) {
                let mut row = Vec::new();
                for tok in chunk.split([' ', '\t', ',', '\r']).filter(|t| !t.is_empty()) {
                    let v = tok
                        .parse::<f64>()
                        .map_err(|_| err(off, format!("bad number `{tok}` in `{name}`")))?;
                    row.push(v);
                }
                if !row.is_empty() {
                    rows.push(row);
                }
                off += chunk.len() + 1;
            }
            matrices.insert(
                name,
                Matrix {
                    rows,
                    line: line_of(text, vstart),
                },
            );
            pos = vstart + 1 + close + 1;
        } else {
            let end = rest.find(';').unwrap_or(rest.len());
            let tok = rest[..end].trim();
            if !tok.starts_with('\'') {
                let v = tok
                    .parse::<f64>()
                    .map_err(|_| err(vstart, format!("bad scalar `{tok}` for `{name}`")))?;
                scalars.insert(name, v);
            }
            pos = vstart + end;
        }
    }
    Ok((scalars, matrices))
}

/// Imports the subset of the Matpower case format used by classical AC OPF
/// studies: `baseMVA`, `bus`, `gen`, `branch` and polynomial `gencost`.
pub fn parse_matpower(text: &str, name: &str, origin: &str) -> Result<NetworkCase, CaseError> {
    let text = strip_comments(text);
    let (scalars, matrices) = parse_assignments(&text, origin)?;
    let missing = |what: &str| CaseError::Parse {
        path: origin.to_string(),
        line: 0,
        column: 0,
        msg: format!("missing `mpc.{what}`"),
    };
    let short = |what: &str, line: usize, need: usize| CaseError::Parse {
        path: origin.to_string(),
        line,
        column: 0,
        msg: format!("`mpc.{what}` rows need at least {need} columns"),
    };
    let base = *scalars.get("baseMVA").ok_or_else(|| missing("baseMVA"))?;
    let bus_m = matrices.get("bus").ok_or_else(|| missing("bus"))?;
    let gen_m = matrices.get("gen").ok_or_else(|| missing("gen"))?;
    let br_m = matrices.get("branch").ok_or_else(|| missing("branch"))?;

    let mut buses = Vec::new();
    let mut loads = Vec::new();
    let mut shunts = Vec::new();
    for r in &bus_m.rows {
        if r.len() < 13 {
            return Err(short("bus", bus_m.line, 13));
        }
        let id = r[0] as usize;
        buses.push(Bus {
            id,
            vmin: r[12],
            vmax: r[11],
            is_reference: r[1] as i64 == 3,
        });
        if r[2] != 0.0 || r[3] != 0.0 {
            loads.push(Load {
                id,
                bus: id,
                p_d: vec![r[2] / base],
                q_d: vec![r[3] / base],
            });
        }
        if r[4] != 0.0 || r[5] != 0.0 {
            shunts.push(Shunt {
                id,
                bus: id,
                g_sh: r[4] / base,
                b_sh: r[5] / base,
            });
        }
    }

    let costs: Vec<(f64, f64, f64)> = match matrices.get("gencost") {
        Some(m) => m
            .rows
            .iter()
            .map(|r| {
                if r.len() < 4 || r[0] as i64 != 2 {
                    return Err(CaseError::Parse {
                        path: origin.to_string(),
                        line: m.line,
                        column: 0,
                        msg: "only polynomial gencost (model 2) is supported".into(),
                    });
                }
                let n = r[3] as usize;
                let c = &r[4..(4 + n).min(r.len())];
                let coef = |k: usize| if k < n { c[n - 1 - k] } else { 0.0 };
                if n > 3 {
                    return Err(CaseError::Parse {
                        path: origin.to_string(),
                        line: m.line,
                        column: 0,
                        msg: format!("polynomial cost of degree {} is not quadratic", n - 1),
                    });
                }
                Ok((coef(2) * base * base, coef(1) * base, coef(0)))
            })
            .collect::<Result<_, _>>()?,
        None => vec![(0.0, 0.0, 0.0); gen_m.rows.len()],
    };
    let mut generators = Vec::new();
    for (k, r) in gen_m.rows.iter().enumerate() {
        if r.len() < 10 {
            return Err(short("gen", gen_m.line, 10));
        }
        if r[7] <= 0.0 {
            continue;
        }
        let (c2, c1, c0) = costs.get(k).copied().unwrap_or((0.0, 0.0, 0.0));
        generators.push(Generator {
            id: k + 1,
            bus: r[0] as usize,
            c2,
            c1,
            c0,
            pmin: r[9] / base,
            pmax: r[8] / base,
            qmin: r[4] / base,
            qmax: r[3] / base,
        });
    }

    let mut branches = Vec::new();
    for (k, r) in br_m.rows.iter().enumerate() {
        if r.len() < 10 {
            return Err(short("branch", br_m.line, 10));
        }
        if r.len() > 10 && r[10] <= 0.0 {
            continue;
        }
        let (rr, x, bc) = (r[2], r[3], r[4]);
        let z2 = rr * rr + x * x;
        let ratio = if r[8] == 0.0 { 1.0 } else { r[8] };
        branches.push(Branch {
            id: k + 1,
            from_bus: r[0] as usize,
            to_bus: r[1] as usize,
            g: rr / z2,
            b: -x / z2,
            g_fr: 0.0,
            b_fr: bc / 2.0,
            g_to: 0.0,
            b_to: bc / 2.0,
            tau: ratio,
            sigma: r[9] * PI / 180.0,
            s_max: r[5] / base,
        });
    }

    Ok(NetworkCase {
        name: name.to_string(),
        base_mva: base,
        horizon: 1,
        buses,
        branches,
        generators,
        loads,
        shunts,
        storage: None,
    })
}

#[derive(Debug, Deserialize)]
struct LoadRecord {
    load_id: usize,
    t: usize,
    p_d: f64,
    q_d: f64,
}

/// Replaces load series from a CSV with columns `load_id,t,p_d,q_d` (per unit,
/// `t` counted from 0). The horizon becomes the number of distinct steps.
pub fn apply_load_csv(case: &mut NetworkCase, path: &Path) -> Result<(), CaseError> {
    let origin = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CaseError::Io {
        path: origin.clone(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let mut series: BTreeMap<usize, BTreeMap<usize, (f64, f64)>> = BTreeMap::new();
    let mut horizon = 0;
    for (k, rec) in rdr.deserialize::<LoadRecord>().enumerate() {
        let rec = rec.map_err(|e| CaseError::Parse {
            path: origin.clone(),
            line: e.position().map_or(k + 2, |p| p.line() as usize),
            column: 0,
            msg: e.to_string(),
        })?;
        horizon = horizon.max(rec.t + 1);
        series.entry(rec.load_id).or_default().insert(rec.t, (rec.p_d, rec.q_d));
    }
    let mut problems = Vec::new();
    for (id, s) in &series {
        let Some(load) = case.loads.iter_mut().find(|l| l.id == *id) else {
            problems.push(format!("load {id} in {origin} is not in the case"));
            continue;
        };
        if s.len() != horizon {
            problems.push(format!("load {id}: {} of {horizon} steps given", s.len()));
            continue;
        }
        load.p_d = s.values().map(|v| v.0).collect();
        load.q_d = s.values().map(|v| v.1).collect();
    }
    for l in &mut case.loads {
        if !series.contains_key(&l.id) {
            problems.push(format!("load {} has no series in {origin}", l.id));
        }
    }
    if !problems.is_empty() {
        return Err(CaseError::Invalid(problems));
    }
    case.horizon = horizon;
    Ok(())
}
