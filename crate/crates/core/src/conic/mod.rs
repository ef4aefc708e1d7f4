//! Convex quadratic programs with linear equalities, box bounds and
//! second-order cones, and the interior-point solver for them.

mod cones;
mod dump;
mod kkt;
mod program;
mod solver;

pub use dump::{dump_program, parse_program};
pub use kkt::{check_kkt, KktReport};
pub use program::{family_of, ConicProgram, FamilyCount, LinearRow, SocBlock, Variable};
pub use solver::{
    solve_conic, solve_conic_with, Residuals, SolveResult, SolveStatus, SolverSettings, WarmStart,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite data in `{0}`")]
    NonFinite(String),
    #[error("negative quadratic coefficient on `{0}`")]
    NonConvex(String),
    #[error("lower bound exceeds upper bound on `{0}`")]
    EmptyBox(String),
    #[error("`{0}` references unknown variable {1}")]
    UnknownVariable(String, usize),
    #[error("invalid cone: {0}")]
    Cone(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
