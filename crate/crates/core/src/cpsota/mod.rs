//! Convex polar second-order Taylor model of the lower-level market clearing.

mod build;
mod check;
mod coeffs;
mod flags;
mod solution;

pub(crate) use build::{bus_demand, shunt_totals};

pub use build::{build_ll_primal, build_ll_primal_step, LlPrimal, PrimalStep, StepLayout};
pub use check::{
    cpsota_arc_flow, evaluate_flow_error, soc_equivalence_check, DeltaPoint, EquivalenceCheck, FlowErrorReport,
};
pub use coeffs::{compute_operating_coeffs, cps_cms, voltage_cone_coeffs, DerivedCoeffs};
pub use flags::{FlagCensus, PresolveFlags};
pub use solution::{solve_ll_primal, Census, PrimalSolution};

use thiserror::Error;

use crate::conic::SolveStatus;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error("horizon mismatch: case {case}, operating point {op}, flags/schedule {flags}")]
    Horizon { case: usize, op: usize, flags: usize },
    #[error("branch {branch} at t={t}: voltage cone requested but its coefficients are undefined")]
    UndefinedCoeffs { branch: usize, t: usize },
    #[error("branch {branch} at t={t}: limit requested on an unrated branch")]
    UnratedLimit { branch: usize, t: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CpsotaError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("invalid program: {0}")]
    Program(String),
    #[error("solver stopped with status {status:?} at t={t}; census: {census:?}")]
    Solve { t: usize, status: SolveStatus, census: Census },
}
