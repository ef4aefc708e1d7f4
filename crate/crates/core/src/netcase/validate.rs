use std::collections::BTreeMap;

use super::NetworkCase;

fn duplicates(kind: &str, ids: impl Iterator<Item = usize>, out: &mut Vec<String>) {
    let mut seen = BTreeMap::new();
    for id in ids {
        *seen.entry(id).or_insert(0usize) += 1;
    }
    for (id, n) in seen {
        if n > 1 {
            out.push(format!("{kind} id {id} appears {n} times"));
        }
    }
}

/// Every violated invariant of `case`; empty when the case is valid.
pub fn validate_case(case: &NetworkCase) -> Vec<String> {
    let mut v = Vec::new();
    let has_bus = |id: usize| case.buses.iter().any(|b| b.id == id);
    if !(case.base_mva > 0.0) {
        v.push(format!("base_mva must be positive, got {}", case.base_mva));
    }
    if case.horizon == 0 {
        v.push("horizon must be at least 1".into());
    }
    duplicates("bus", case.buses.iter().map(|b| b.id), &mut v);
    duplicates("branch", case.branches.iter().map(|b| b.id), &mut v);
    duplicates("generator", case.generators.iter().map(|g| g.id), &mut v);
    duplicates("load", case.loads.iter().map(|l| l.id), &mut v);
    duplicates("shunt", case.shunts.iter().map(|s| s.id), &mut v);

    let refs: Vec<usize> = case.buses.iter().filter(|b| b.is_reference).map(|b| b.id).collect();
    match refs.len() {
        1 => {}
        0 => v.push("no reference bus".into()),
        _ => v.push(format!(
            "{} reference buses: {}",
            refs.len(),
            refs.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", ")
        )),
    }
    for b in &case.buses {
        if !(b.vmin > 0.0) {
            v.push(format!("bus {}: vmin {} must be positive", b.id, b.vmin));
        }
        if !(b.vmin <= b.vmax) {
            v.push(format!("bus {}: vmin {} exceeds vmax {}", b.id, b.vmin, b.vmax));
        }
    }
    for br in &case.branches {
        let vals = [br.g, br.b, br.g_fr, br.b_fr, br.g_to, br.b_to, br.tau, br.sigma, br.s_max];
        if vals.iter().any(|x| !x.is_finite()) {
            v.push(format!("branch {}: non-finite parameter", br.id));
        }
        if !(br.tau > 0.0) {
            v.push(format!("branch {}: tap {} must be positive", br.id, br.tau));
        }
        if br.from_bus == br.to_bus {
            v.push(format!("branch {}: both ends at bus {}", br.id, br.from_bus));
        }
        if br.s_max < 0.0 {
            v.push(format!("branch {}: negative rating {}", br.id, br.s_max));
        }
        for end in [br.from_bus, br.to_bus] {
            if !has_bus(end) {
                v.push(format!("branch {}: unknown bus {}", br.id, end));
            }
        }
    }
    for g in &case.generators {
        if !has_bus(g.bus) {
            v.push(format!("generator {}: unknown bus {}", g.id, g.bus));
        }
        if g.c2 < 0.0 {
            v.push(format!("generator {}: c2 = {} < 0 makes the cost nonconvex", g.id, g.c2));
        }
        if !(g.pmin <= g.pmax) {
            v.push(format!("generator {}: pmin {} exceeds pmax {}", g.id, g.pmin, g.pmax));
        }
        if !(g.qmin <= g.qmax) {
            v.push(format!("generator {}: qmin {} exceeds qmax {}", g.id, g.qmin, g.qmax));
        }
    }
    for l in &case.loads {
        if !has_bus(l.bus) {
            v.push(format!("load {}: unknown bus {}", l.id, l.bus));
        }
        if l.p_d.len() != case.horizon || l.q_d.len() != case.horizon {
            v.push(format!(
                "load {}: series lengths ({}, {}) differ from horizon {}",
                l.id,
                l.p_d.len(),
                l.q_d.len(),
                case.horizon
            ));
        }
        if l.p_d.iter().chain(&l.q_d).any(|x| !x.is_finite()) {
            v.push(format!("load {}: non-finite value", l.id));
        }
    }
    for s in &case.shunts {
        if !has_bus(s.bus) {
            v.push(format!("shunt {}: unknown bus {}", s.id, s.bus));
        }
    }
    if let Some(es) = &case.storage {
        if !has_bus(es.bus) {
            v.push(format!("storage: unknown bus {}", es.bus));
        }
        if !(0.0..=es.soe_max).contains(&es.soe_init) {
            v.push(format!(
                "storage: soe_init {} outside [0, {}]",
                es.soe_init, es.soe_max
            ));
        }
        for (name, eta) in [("eta_ch", es.eta_ch), ("eta_dis", es.eta_dis)] {
            if !(eta > 0.0 && eta <= 1.0) {
                v.push(format!("storage: {name} = {eta} outside (0, 1]"));
            }
        }
        if !(es.s_max >= 0.0) {
            v.push(format!("storage: negative rating {}", es.s_max));
        }
    }
    v
}
