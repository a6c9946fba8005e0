//! Dense double-precision linear algebra: matrices, deterministic products,
//! LU-based exact inverse, and the CG/GMRES solver baselines.

mod cg;
mod gmres;
mod lu;
mod matmul;
mod matrix;

pub use cg::{cg_solve, SolveOutcome};
pub use gmres::gmres_solve;
pub use lu::{gaussian_inverse, gaussian_solve, LuFactors};
pub use matmul::{frobenius_distance, frobenius_norm, inverse_residual, matmul};
pub use matrix::{vec_dot, vec_norm, DenseMatrix, SpdMatrix};
