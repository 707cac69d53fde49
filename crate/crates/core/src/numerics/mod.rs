//! Self-contained numerical kernels: complex linear algebra, the
//! Moore–Penrose pseudo-inverse and a small LP solver with duals.

mod complex;
mod lp;
mod pinv;

pub use complex::{l2_norm, vec_dot, ComplexMatrix};
pub use lp::{lp_solve, LpProblem, LpSolution, LpStatus, RowSense};
pub use pinv::pseudo_inverse;

pub use num_complex::Complex64;

/// Primal feasibility tolerance for LP solutions.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for LP optimality.
pub const OPTIMALITY_TOL: f64 = 1e-8;
/// Relative cutoff below which singular values are dropped.
pub const SINGULAR_CUTOFF: f64 = 1e-10;
