//! Weighted Clément quasi-interpolation from the fine level onto the coarse
//! P1 space with homogeneous boundary values.
//!
//! The nodal value at an interior coarse vertex `x` is
//! `(I_H v)(x) = (v, lambda_x) / (1, lambda_x)`. Both `v` and `lambda_x` are
//! piecewise linear on the fine mesh, so row `x` of the operator is
//! `(M_h p_x)^T / w_x` with `M_h` the full fine mass matrix, `p_x` the
//! prolongated coarse hat and `w_x = (1, lambda_x)`; no quadrature is involved.

use crate::error::{LodError, Result};
use crate::fem::assemble_mass;
use crate::linalg::SparseMatrix;
use crate::mesh::{Patch, TriMesh};

#[derive(Debug, Clone)]
pub struct InterpolationMatrix {
    /// Interior coarse vertices x all fine vertices.
    pub matrix: SparseMatrix,
    /// `w_x = (1, lambda_x)` per row.
    pub weights: Vec<f64>,
    /// Coarse vertex id of each row.
    pub coarse_vertices: Vec<usize>,
    row_of_vertex: Vec<Option<usize>>,
}

pub fn build_clement(mesh: &TriMesh) -> Result<InterpolationMatrix> {
    if mesh.level_count() < 2 {
        return Err(LodError::InvalidMesh(
            "Clément interpolation needs at least one refinement".into(),
        ));
    }
    let fine = mesh.fine();
    let coarse = mesh.coarse();
    let mass = assemble_mass(fine);
    let coarse_vertices = coarse.interior_vertices();
    let prolongation = mesh
        .prolongation(0, mesh.fine_level())?
        .select(&(0..fine.vertex_count()).collect::<Vec<_>>(), &coarse_vertices);

    // (M P)^T: row x holds (psi_i, lambda_x) for every fine vertex i
    let mixed = mass.matmul(&prolongation)?.transpose();
    let weights: Vec<f64> = (0..mixed.rows())
        .map(|x| mixed.row(x).1.iter().sum())
        .collect();
    let triplets: Vec<(usize, usize, f64)> = (0..mixed.rows())
        .flat_map(|x| {
            let (cols, vals) = mixed.row(x);
            let w = weights[x];
            cols.iter()
                .zip(vals)
                .filter(|(_, &v)| v != 0.0)
                .map(move |(&i, &v)| (x, i, v / w))
                .collect::<Vec<_>>()
        })
        .collect();
    let matrix = SparseMatrix::from_triplets(coarse_vertices.len(), fine.vertex_count(), triplets);

    let mut row_of_vertex = vec![None; coarse.vertex_count()];
    for (r, &v) in coarse_vertices.iter().enumerate() {
        row_of_vertex[v] = Some(r);
    }
    Ok(InterpolationMatrix {
        matrix,
        weights,
        coarse_vertices,
        row_of_vertex,
    })
}

impl InterpolationMatrix {
    pub fn coarse_count(&self) -> usize {
        self.matrix.rows()
    }

    pub fn row_of(&self, coarse_vertex: usize) -> Option<usize> {
        self.row_of_vertex.get(coarse_vertex).copied().flatten()
    }

    /// Coarse nodal values at interior vertices of a full fine nodal vector.
    pub fn apply(&self, fine: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(fine)
    }

    /// Full coarse nodal vector (boundary values zero).
    pub fn apply_full(&self, fine: &[f64], coarse_vertex_count: usize) -> Vec<f64> {
        let mut out = vec![0.0; coarse_vertex_count];
        for (v, x) in self.coarse_vertices.iter().zip(self.apply(fine)) {
            out[*v] = x;
        }
        out
    }

    /// Rows of the operator restricted to the patch interior, zero rows
    /// removed. `C v = 0` holds exactly when the extension of `v` by zero is
    /// in the kernel of the interpolation.
    ///
    /// Returns the constraint block (columns ordered as
    /// `patch.interior_fine_dofs`) and the operator row of each kept row.
    pub fn constraint_rows(&self, patch: &Patch) -> Result<(SparseMatrix, Vec<usize>)> {
        if patch.interior_fine_dofs.is_empty() {
            return Err(LodError::EmptyPatch(patch.center));
        }
        let all: Vec<usize> = (0..self.matrix.rows()).collect();
        let restricted = self.matrix.select(&all, &patch.interior_fine_dofs);
        let kept = restricted.nonzero_rows();
        let c = restricted.select(&kept, &(0..restricted.cols()).collect::<Vec<_>>());
        Ok((c, kept))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_inf;
    use crate::mesh::build_hierarchy;
    use std::collections::BTreeSet;

    #[test]
    fn rows_sum_to_one_and_reproduce_constants() {
        let mesh = build_hierarchy(4, 2).unwrap();
        let p = build_clement(&mesh).unwrap();
        assert_eq!(p.coarse_count(), 9);
        let ones = vec![1.0; mesh.fine().vertex_count()];
        for v in p.apply(&ones) {
            assert!((v - 1.0).abs() < 1e-14);
        }
        // w_x = |supp lambda_x| / 3 = 6 * (H^2 / 2) / 3
        for &w in &p.weights {
            assert!((w - 1.0 / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hat_interpolates_to_one_half() {
        // (lambda_x, lambda_x) / (1, lambda_x) = (6|T|/6) / (6|T|/3) = 1/2
        let mesh = build_hierarchy(4, 1).unwrap();
        let p = build_clement(&mesh).unwrap();
        let c = mesh.coarse();
        let x = c.vertex_index(2, 2);
        let mut hat = vec![0.0; c.vertex_count()];
        hat[x] = 1.0;
        let fine_hat = mesh.prolongation(0, 1).unwrap().mul_vec(&hat);
        let out = p.apply(&fine_hat);
        let row = p.row_of(x).unwrap();
        assert!((out[row] - 0.5).abs() < 1e-14);
        // so I_H is not a projection
        assert!(out.iter().filter(|v| v.abs() > 0.0).count() > 1);
    }

    #[test]
    fn disjoint_support_gives_zero() {
        let mesh = build_hierarchy(4, 1).unwrap();
        let p = build_clement(&mesh).unwrap();
        let (c, f) = (mesh.coarse(), mesh.fine());
        let x = c.vertex_index(1, 1);
        // fine vertex (7, 7) = (7/8, 7/8) is outside supp lambda_x = [0, 1/2]^2 region
        let mut v = vec![0.0; f.vertex_count()];
        v[f.vertex_index(7, 7)] = 1.0;
        assert_eq!(p.apply(&v)[p.row_of(x).unwrap()], 0.0);
        // row support is exactly the fine vertices inside the hat support
        let (cols, _) = p.matrix.row(p.row_of(x).unwrap());
        let support: BTreeSet<usize> = mesh
            .prolongation(0, 1)
            .unwrap()
            .transpose()
            .row(x)
            .0
            .iter()
            .flat_map(|&v| f.vertex_triangles(v).iter().flat_map(|&t| f.triangles()[t]))
            .collect();
        assert!(cols.iter().all(|c| support.contains(c)));
    }

    #[test]
    fn full_patch_constraints_have_all_rows() {
        let mesh = build_hierarchy(4, 1).unwrap();
        let p = build_clement(&mesh).unwrap();
        let x = mesh.central_vertex();
        let patch = mesh.node_patch(x, 4).unwrap();
        let (c, kept) = p.constraint_rows(&patch).unwrap();
        assert_eq!(c.rows(), 9);
        assert_eq!(kept, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn one_layer_constraints_match_support_overlap() {
        let mesh = build_hierarchy(8, 2).unwrap();
        let p = build_clement(&mesh).unwrap();
        let x = mesh.central_vertex();
        let patch = mesh.node_patch(x, 1).unwrap();
        let (_, kept) = p.constraint_rows(&patch).unwrap();
        let interior: BTreeSet<usize> = patch.interior_fine_dofs.iter().copied().collect();
        let oracle: Vec<usize> = (0..p.coarse_count())
            .filter(|&r| p.matrix.row(r).0.iter().any(|c| interior.contains(c)))
            .collect();
        assert_eq!(kept, oracle);
        assert!(kept.contains(&p.row_of(x).unwrap()));
        // x and its six neighbours
        assert_eq!(kept.len(), 7);
    }

    #[test]
    fn kernel_functions_satisfy_local_constraints() {
        let mesh = build_hierarchy(4, 2).unwrap();
        let p = build_clement(&mesh).unwrap();
        let f = mesh.fine();
        let x = mesh.central_vertex();
        let patch = mesh.node_patch(x, 1).unwrap();
        // v = psi_a - (ratio) psi_b with both fine hats inside the patch:
        // build a kernel element by projecting out the rows that see the patch
        let (c, kept) = p.constraint_rows(&patch).unwrap();
        let dense = c.to_dense();
        let n = c.cols();
        // Gram-Schmidt on the rows, then remove components from a test vector
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for row in &dense {
            let mut r = row.clone();
            for b in &basis {
                let d: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
                r.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
            let nrm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.iter_mut().for_each(|x| *x /= nrm);
            basis.push(r);
        }
        let mut v: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let mut full = vec![0.0; f.vertex_count()];
        for (&dof, &val) in patch.interior_fine_dofs.iter().zip(&v) {
            full[dof] = val;
        }
        assert!(norm_inf(&p.apply(&full)) < 1e-12);
        assert!(norm_inf(&c.mul_vec(&v)) < 1e-12);
        assert_eq!(kept.len(), c.rows());
    }

    #[test]
    fn empty_patch_is_rejected() {
        let mesh = build_hierarchy(4, 1).unwrap();
        let p = build_clement(&mesh).unwrap();
        let mut patch = mesh.node_patch(mesh.central_vertex(), 1).unwrap();
        patch.interior_fine_dofs.clear();
        assert!(matches!(p.constraint_rows(&patch), Err(LodError::EmptyPatch(_))));
    }
}
