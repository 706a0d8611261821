//! Sparse storage and the two solve paths used everywhere else: Jacobi-PCG
//! for SPD systems and sparse LU for KKT systems.

mod cg;
mod saddle;
mod sparse;

pub use cg::{spd_solve, DEFAULT_TOL};
pub use saddle::{saddle_solve, SaddleFactorization, SaddleSolution, CONSTRAINT_TOL, KKT_TOL};
pub use sparse::{dot, norm2, norm_inf, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    ConjugateGradient,
    SparseLu,
}

impl std::fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveMethod::ConjugateGradient => "pcg",
            SolveMethod::SparseLu => "sparse-lu",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// Zero for direct solves.
    pub iterations: usize,
    pub relative_residual: f64,
    pub method: SolveMethod,
}

impl SolveReport {
    pub fn new(method: SolveMethod, iterations: usize, relative_residual: f64) -> Self {
        Self {
            iterations,
            relative_residual,
            method,
        }
    }
}
