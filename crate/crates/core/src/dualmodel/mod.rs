//! Explicit lower-level dual and primal-dual certificates.

mod build;
mod solution;

pub use build::{build_ll_dual, build_ll_dual_step, BoxDual, DualLayout, DualOptions, DualStep, LlDual, ShuntTermForm};
pub use solution::{
    certify_dual_cones, complementary_slackness_report, dual_from_primal, duality_gap, relative_gap, solve_ll_dual,
    solve_ll_dual_warm,
    ConeCertificate, DualSolution, SlacknessReport,
};

use thiserror::Error;

use crate::conic::SolveStatus;
use crate::cpsota::BuildError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("invalid program: {0}")]
    Program(String),
    #[error("dual solve stopped with status {status:?} at t={t}")]
    Solve { t: usize, status: SolveStatus },
    #[error("{side} solve at t={t} is not optimal")]
    NotOptimal { side: &'static str, t: usize },
}
