//! Convex quadratic and mixed-binary quadratic optimization.
//!
//! The QP engines work on sparse data: a primal active-set method for exact
//! solutions and an interior-point method for large relaxations, both built on
//! a sparse LDLᵀ factorization of the KKT matrix. The MIQP layer runs a
//! deterministic branch-and-bound over binary variables.

pub mod active_set;
pub mod ipm;
pub mod ldl;
pub mod miqp;
pub mod presolve;
pub mod qp;
pub mod solver;
pub mod sparse;

pub use active_set::WarmStart;
pub use miqp::{enumerate_exhaustive, solve_miqp, MiqpError, MiqpOptions, MiqpProblem, MiqpResult, MiqpStatus};
pub use qp::{kkt_residuals, FixedElimination, KktResiduals, QpError, QpSolution, QpStatus, QuadraticProgram};
pub use solver::{solve_convex_qp, QpMethod, QpOptions};
pub use sparse::SparseRows;
