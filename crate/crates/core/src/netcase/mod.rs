//! Transmission network cases: types, validation, index sets and file formats.

mod index;
mod io;
mod validate;

pub use index::{Arc, IndexSets};
pub use io::{
    apply_load_csv, load_case, parse_matpower, read_case_json, save_case_json, CaseFormat,
};
pub use validate::validate_case;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub vmin: f64,
    pub vmax: f64,
    #[serde(default)]
    pub is_reference: bool,
}

/// π-model branch with off-nominal tap `tau` and phase shift `sigma` on the from side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    pub from_bus: usize,
    pub to_bus: usize,
    pub g: f64,
    pub b: f64,
    #[serde(default)]
    pub g_fr: f64,
    #[serde(default)]
    pub b_fr: f64,
    #[serde(default)]
    pub g_to: f64,
    #[serde(default)]
    pub b_to: f64,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default)]
    pub sigma: f64,
    /// 0 means unrated
    #[serde(default)]
    pub s_max: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: usize,
    pub bus: usize,
    #[serde(default)]
    pub c2: f64,
    #[serde(default)]
    pub c1: f64,
    #[serde(default)]
    pub c0: f64,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub id: usize,
    pub bus: usize,
    pub p_d: Vec<f64>,
    pub q_d: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shunt {
    pub id: usize,
    pub bus: usize,
    pub g_sh: f64,
    pub b_sh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageUnit {
    pub bus: usize,
    pub soe_max: f64,
    pub s_max: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    #[serde(default)]
    pub soe_init: f64,
}

/// Per-unit system description on `base_mva`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub name: String,
    pub base_mva: f64,
    pub horizon: usize,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub loads: Vec<Load>,
    #[serde(default)]
    pub shunts: Vec<Shunt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage: Option<StorageUnit>,
}

impl NetworkCase {
    pub fn bus_position(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn reference_position(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.is_reference)
    }

    /// Repeats single-period load data over `horizon` steps.
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        for l in &mut self.loads {
            if l.p_d.len() == 1 && l.q_d.len() == 1 {
                l.p_d = vec![l.p_d[0]; horizon];
                l.q_d = vec![l.q_d[0]; horizon];
            }
        }
        self.horizon = horizon;
        self
    }

    pub fn without_storage(&self) -> Self {
        Self {
            storage: None,
            ..self.clone()
        }
    }

    /// Restriction of the case to the single time step `t`.
    pub fn at_step(&self, t: usize) -> Self {
        let mut c = self.clone();
        c.horizon = 1;
        for l in &mut c.loads {
            l.p_d = vec![l.p_d[t]];
            l.q_d = vec![l.q_d[t]];
        }
        c
    }
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {msg}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("invalid case:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}
