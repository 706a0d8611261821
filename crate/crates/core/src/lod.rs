//! Localized multiscale Galerkin method: the coarse space spanned by
//! `lambda_x - phi_{x,k}` and its solution and error measures.

use crate::corrector::CorrectorSet;
use crate::error::{LodError, Result};
use crate::fem::{solve_in_subspace, AssembledProblem, FieldVector};
use crate::interpolation::InterpolationMatrix;
use crate::linalg::{SolveReport, SparseMatrix};
use crate::mesh::TriMesh;

/// Basis matrix over fine free dofs, one column per interior coarse vertex
/// (Clément row order).
pub fn build_basis(
    mesh: &TriMesh,
    problem: &AssembledProblem,
    correctors: &CorrectorSet,
) -> Result<SparseMatrix> {
    if problem.level != mesh.fine_level() {
        return Err(LodError::Dimension(format!(
            "basis needs the fine problem (level {}), got level {}",
            mesh.fine_level(),
            problem.level
        )));
    }
    let coarse_interior = mesh.coarse().interior_vertices();
    if correctors.correctors.len() != coarse_interior.len() {
        return Err(LodError::Dimension(format!(
            "{} correctors for {} interior coarse vertices",
            correctors.correctors.len(),
            coarse_interior.len()
        )));
    }
    let prolongation = mesh.prolongation(0, mesh.fine_level())?;
    let restricted = problem.restrict_prolongation(&prolongation, &coarse_interior);
    let mut triplets: Vec<_> = restricted.triplets().collect();
    for (col, (c, &x)) in correctors.correctors.iter().zip(&coarse_interior).enumerate() {
        if c.vertex != x {
            return Err(LodError::Dimension(format!(
                "corrector {col} belongs to vertex {}, expected {x}",
                c.vertex
            )));
        }
        for (&d, &v) in c.dofs.iter().zip(&c.values) {
            let row = problem
                .dof_of_vertex(d)
                .ok_or_else(|| LodError::Dimension(format!("corrector dof {d} is not free")))?;
            triplets.push((row, col, -v));
        }
    }
    Ok(SparseMatrix::from_triplets(
        problem.free_count(),
        coarse_interior.len(),
        triplets,
    ))
}

#[derive(Debug, Clone)]
pub struct MultiscaleSolution {
    /// One coefficient per interior coarse vertex.
    pub coarse: Vec<f64>,
    /// `B c` on the fine level.
    pub fine: FieldVector,
    /// Clément interpolant of `fine` at interior coarse vertices.
    pub interpolant: Vec<f64>,
    /// The interpolant as a fine-level field.
    pub interpolant_fine: FieldVector,
    pub k: usize,
    pub report: SolveReport,
}

/// Galerkin solve in the span of the basis columns.
pub fn solve_lod(
    mesh: &TriMesh,
    problem: &AssembledProblem,
    clement: &InterpolationMatrix,
    basis: &SparseMatrix,
    k: usize,
    tol: f64,
) -> Result<MultiscaleSolution> {
    if basis.cols() != clement.coarse_count() {
        return Err(LodError::Dimension(format!(
            "basis has {} columns, expected {}",
            basis.cols(),
            clement.coarse_count()
        )));
    }
    let sub = solve_in_subspace(problem, basis, tol)?;
    let fine = problem.extend(&sub.free_values);
    let coarse_vertices = mesh.coarse().vertex_count();
    let interpolant_full = clement.apply_full(&fine.values, coarse_vertices);
    let interpolant = clement.apply(&fine.values);
    let interpolant_fine = FieldVector {
        level: problem.level,
        values: mesh
            .prolongation(0, mesh.fine_level())?
            .mul_vec(&interpolant_full),
    };
    Ok(MultiscaleSolution {
        coarse: sub.coefficients,
        fine,
        interpolant,
        interpolant_fine,
        k,
        report: sub.report,
    })
}

/// Errors relative to the reference. When the reference has zero norm the
/// errors are absolute and `degenerate` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub rel_energy: f64,
    pub rel_l2: f64,
    /// L2 error of the prolongated Clément interpolant.
    pub rel_l2_interp: f64,
    pub degenerate: bool,
}

/// Relative energy and L2 error of `approx` with respect to `reference`.
pub fn relative_errors(
    problem: &AssembledProblem,
    reference: &FieldVector,
    approx: &FieldVector,
) -> Result<(f64, f64, bool)> {
    let r = problem.restrict(reference)?;
    let a = problem.restrict(approx)?;
    let diff: Vec<f64> = r.iter().zip(&a).map(|(x, y)| x - y).collect();
    let (e_energy, e_l2) = (problem.energy_norm_free(&diff), problem.l2_norm_free(&diff));
    let (n_energy, n_l2) = (problem.energy_norm_free(&r), problem.l2_norm_free(&r));
    if n_energy == 0.0 || n_l2 == 0.0 {
        return Ok((e_energy, e_l2, true));
    }
    Ok((e_energy / n_energy, e_l2 / n_l2, false))
}

pub fn errors_vs_reference(
    problem: &AssembledProblem,
    reference: &FieldVector,
    sol: &MultiscaleSolution,
) -> Result<ErrorRecord> {
    let (rel_energy, rel_l2, degenerate) = relative_errors(problem, reference, &sol.fine)?;
    let (_, rel_l2_interp, _) = relative_errors(problem, reference, &sol.interpolant_fine)?;
    Ok(ErrorRecord {
        rel_energy,
        rel_l2,
        rel_l2_interp,
        degenerate,
    })
}

/// How the layer count follows from the coarse mesh width:
/// `k = ceil(factor * log_base(1 / H))`, at least 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerRule {
    pub factor: f64,
    pub base: f64,
}

impl Default for LayerRule {
    fn default() -> Self {
        Self {
            factor: 2.0,
            base: std::f64::consts::E,
        }
    }
}

impl LayerRule {
    pub fn layers(&self, coarse_m: usize) -> usize {
        let k = (self.factor * (coarse_m as f64).ln() / self.base.ln()).ceil();
        (k as usize).max(1)
    }
}
