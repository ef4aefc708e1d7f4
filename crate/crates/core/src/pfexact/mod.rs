//! Exact polar power flow and AC optimal power flow.

mod newton;
mod opf;
mod phi;

pub use newton::{mismatch, newton_power_flow, BusKind, NewtonSettings, PfInjections, PfSolution};
pub use opf::{solve_exact_polar_opf, OpfSettings};
pub use phi::{branch_ratings, loading_ratios, phi_from_exact, select_phi_flags};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Voltage magnitudes and angles indexed `[t][bus]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub v_op: Vec<Vec<f64>>,
    pub th_op: Vec<Vec<f64>>,
}

/// Starting point of the barrier iteration (identical for every time step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedPoint {
    pub v: Vec<f64>,
    pub th: Vec<f64>,
    pub pg: Vec<f64>,
    pub qg: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub iterations: usize,
    pub stationarity: f64,
    pub balance_residual: f64,
    pub complementarity: f64,
    pub barrier: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub barrier: f64,
    pub stationarity: f64,
    pub primal_infeasibility: f64,
    pub complementarity: f64,
}

/// Exact OPF result; per-arc vectors list forward arcs then reverse arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub pg: Vec<Vec<f64>>,
    pub qg: Vec<Vec<f64>>,
    pub op: OperatingPoint,
    pub price_p: Vec<Vec<f64>>,
    pub price_q: Vec<Vec<f64>>,
    pub objective: f64,
    pub cost: Vec<f64>,
    pub flow_p: Vec<Vec<f64>>,
    pub flow_q: Vec<Vec<f64>>,
    /// multipliers of `P² + Q² ≤ s_max²`
    pub limit_mu: Vec<Vec<f64>>,
    pub steps: Vec<StepStats>,
    pub seed: SeedPoint,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PfError {
    #[error("no slack bus")]
    NoSlack,
    #[error("singular power-flow Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e})")]
    Diverged { iterations: usize, mismatch: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpfError {
    #[error("{0}")]
    Case(String),
    #[error("exact OPF infeasible at t={t}: {}", .violated.join(", "))]
    Infeasible { t: usize, violated: Vec<String> },
    #[error("exact OPF did not converge at t={t} after {} iterations", .history.len())]
    NonConvergence { t: usize, history: Vec<IterRecord> },
    #[error("KKT system could not be factored at t={t}, iteration {iteration}")]
    Linear { t: usize, iteration: usize },
}
