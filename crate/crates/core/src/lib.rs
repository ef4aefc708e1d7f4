//! Bilevel strategic storage bidding over a convex AC OPF market clearing.
//!
//! Numerical kernels (`conic`, `linalg`, `physics`, the Newton power flow) are generic
//! over [`scalar::Scalar`]; case-level code works in `f64`.

pub mod bilevel;
pub mod conic;
pub mod cpsota;
pub mod dualmodel;
pub mod linalg;
pub mod netcase;
pub mod pfexact;
pub mod presolve;
pub mod physics;
pub mod scalar;
pub mod verify_report;

pub use scalar::Scalar;

pub type ConicProgram64 = conic::ConicProgram<f64>;
pub type ConicProgram32 = conic::ConicProgram<f32>;
pub type SolverSettings64 = conic::SolverSettings<f64>;
pub type SolverSettings32 = conic::SolverSettings<f32>;
pub type SolveResult64 = conic::SolveResult<f64>;
pub type SolveResult32 = conic::SolveResult<f32>;
pub type WarmStart64 = conic::WarmStart<f64>;
pub type WarmStart32 = conic::WarmStart<f32>;
pub type Network64 = physics::Network<f64>;
pub type Network32 = physics::Network<f32>;
pub type PfInjections64 = pfexact::PfInjections<f64>;
pub type PfInjections32 = pfexact::PfInjections<f32>;
pub type PfSolution64 = pfexact::PfSolution<f64>;
pub type PfSolution32 = pfexact::PfSolution<f32>;
pub type CscMatrix64 = linalg::CscMatrix<f64>;
pub type CscMatrix32 = linalg::CscMatrix<f32>;
