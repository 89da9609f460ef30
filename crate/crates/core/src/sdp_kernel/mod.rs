//! Dense semidefinite kernel for a single linear matrix inequality.
//!
//! Sized for the allocation dual: one LMI of order `K + 2` with a few hundred
//! scalar multipliers at most.

mod barrier;
pub mod linalg;

pub use barrier::{solve_lmi_barrier, BarrierParams, LmiProblem, LmiSolution, SparseSym};
pub use linalg::{min_eigenvalue, pseudo_inverse, Cholesky, Matrix, SymmetricEigen};
