//! Localized orthogonal decomposition (LOD) for `-div(A grad u) = g` on the
//! unit square with homogeneous Dirichlet conditions and rough, cell-wise
//! constant coefficients `A`, discretized with P1 elements on nested uniform
//! triangulations.
//!
//! The coarse space is spanned by the coarse hat functions minus their
//! localized correctors. Correctors are computed on a fine mesh that resolves
//! the coefficient, with the kernel of a Clément-type quasi-interpolation
//! imposed through Lagrange multipliers.

pub mod cli;
pub mod coefficient;
pub mod corrector;
pub mod error;
pub mod fem;
pub mod interpolation;
pub mod linalg;
pub mod lod;
pub mod mesh;
pub mod study;

pub use coefficient::CoefficientField;
pub use corrector::{compute_all, decay_profile, solve_corrector, CorrectorSet, LocalCorrector};
pub use error::{LodError, Result};
pub use fem::{assemble, solve_galerkin, AssembledProblem, FieldVector, LoadSpec};
pub use interpolation::{build_clement, InterpolationMatrix};
pub use linalg::{SolveReport, SparseMatrix};
pub use lod::{build_basis, errors_vs_reference, solve_lod, ErrorRecord, LayerRule, MultiscaleSolution};
pub use mesh::{build_hierarchy, Patch, TriMesh};
