#![allow(dead_code)]

use std::path::PathBuf;

use bilevel_core::netcase::{load_case, Bus, CaseFormat, Generator, Load, NetworkCase};
use num_complex::Complex64 as C;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn load(name: &str) -> NetworkCase {
    let p = fixture(name);
    load_case(&p, CaseFormat::from_path(&p)).unwrap()
}

/// Dense bus admittance matrix assembled from complex branch admittances.
pub fn ybus(case: &NetworkCase) -> Vec<Vec<C>> {
    let n = case.buses.len();
    let pos = |id: usize| case.buses.iter().position(|b| b.id == id).unwrap();
    let mut y = vec![vec![C::new(0.0, 0.0); n]; n];
    for br in &case.branches {
        let (i, j) = (pos(br.from_bus), pos(br.to_bus));
        let ys = C::new(br.g, br.b);
        let tap = C::from_polar(br.tau, br.sigma);
        y[i][i] += (ys + C::new(br.g_fr, br.b_fr)) / (br.tau * br.tau);
        y[j][j] += ys + C::new(br.g_to, br.b_to);
        y[i][j] -= ys / tap.conj();
        y[j][i] -= ys / tap;
    }
    for s in &case.shunts {
        let i = pos(s.bus);
        y[i][i] += C::new(s.g_sh, s.b_sh);
    }
    y
}

/// Complex power injected into the network at each bus.
pub fn injections(y: &[Vec<C>], v: &[f64], th: &[f64]) -> Vec<C> {
    let u: Vec<C> = v.iter().zip(th).map(|(m, a)| C::from_polar(*m, *a)).collect();
    (0..u.len())
        .map(|i| {
            let cur: C = (0..u.len()).map(|j| y[i][j] * u[j]).sum();
            u[i] * cur.conj()
        })
        .collect()
}

/// Complex flow leaving `from` on branch `br` (or leaving `to` when `reverse`).
pub fn branch_flow(case: &NetworkCase, k: usize, reverse: bool, v: &[f64], th: &[f64]) -> C {
    let br = &case.branches[k];
    let pos = |id: usize| case.buses.iter().position(|b| b.id == id).unwrap();
    let (i, j) = (pos(br.from_bus), pos(br.to_bus));
    let ys = C::new(br.g, br.b);
    let tap = C::from_polar(br.tau, br.sigma);
    let ui = C::from_polar(v[i], th[i]);
    let uj = C::from_polar(v[j], th[j]);
    if reverse {
        let cur = (ys + C::new(br.g_to, br.b_to)) * uj - ys / tap * ui;
        uj * cur.conj()
    } else {
        let cur = (ys + C::new(br.g_fr, br.b_fr)) / (br.tau * br.tau) * ui - ys / tap.conj() * uj;
        ui * cur.conj()
    }
}

pub fn bus(id: usize, vmin: f64, vmax: f64, is_reference: bool) -> Bus {
    Bus {
        id,
        vmin,
        vmax,
        is_reference,
    }
}

pub fn generator(id: usize, bus: usize, c2: f64, c1: f64, pmax: f64) -> Generator {
    Generator {
        id,
        bus,
        c2,
        c1,
        c0: 0.0,
        pmin: 0.0,
        pmax,
        qmin: -pmax,
        qmax: pmax,
    }
}

pub fn load_at(id: usize, bus: usize, p: f64, q: f64) -> Load {
    Load {
        id,
        bus,
        p_d: vec![p],
        q_d: vec![q],
    }
}
