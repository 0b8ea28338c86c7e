//! Kaczmarz-type row-action solvers for consistent linear systems and for
//! ridge regression through the implicit operator `A Aᵀ + τI`.
//!
//! ```
//! use kaczmarz::{bench, solve, SelectionStrategy, SolveConfig};
//!
//! let a = bench::gen_gaussian(60, 10, 7);
//! let system = bench::make_consistent_system(a).unwrap();
//! let report = solve(&system, &SolveConfig::new(SelectionStrategy::MaxHomogenized)).unwrap();
//! assert!(report.terminated.converged());
//! ```

pub mod bench;
pub mod cli;
pub mod engine;
pub mod matrix;
pub mod ridge;
pub mod selection;

pub use engine::{
    solve, solve_with_observer, LinearSystem, ResidualMode, SolveConfig, SolveReport, StopRule,
    Termination,
};
pub use matrix::{Matrix, MatrixError, RowNormCache};
pub use ridge::{ridge_solve, NormMode, RidgeConfig, RidgeMethod};
pub use selection::{SampleGate, SelectionStrategy, ZTestMode};
