//! Sparse and dense linear algebra used by the interior-point solvers.

mod dense;
mod ldl;
mod ordering;
mod sparse;

pub use dense::LuFactor;
pub use ldl::{FactorStats, LdlFactor, LdlSymbolic};
pub use ordering::minimum_degree;
pub use sparse::{CscMatrix, Triplets};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("entry ({row}, {col}) lies below the diagonal of an upper-triangular input")]
    NotUpper { row: usize, col: usize },
    #[error("structurally missing diagonal entry at column {0}")]
    MissingDiagonal(usize),
    #[error("zero pivot at column {0}")]
    ZeroPivot(usize),
    #[error("pattern differs from the analyzed one")]
    PatternMismatch,
}
