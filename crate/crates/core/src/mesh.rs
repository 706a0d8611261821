//! Nested uniform triangulations of the unit square.
//!
//! Every level is an `m x m` Cartesian grid with each square split into two
//! right triangles along its bottom-left to top-right diagonal. Level `L + 1`
//! is the uniform red refinement of level `L`, which for this pattern is again
//! the diagonal-split grid with `2m` subdivisions, so the levels are nested.
//!
//! Vertices are numbered lexicographically, row-major by `y` then `x`: vertex
//! `(i, j)` (column `i`, row `j`) has index `j * (m + 1) + i`. Square `(i, j)`
//! owns triangles `2 * (j * m + i)` (below the diagonal) and `2 * (j * m + i) + 1`
//! (above it).

use crate::error::{LodError, Result};
use crate::linalg::SparseMatrix;

/// One level of the hierarchy.
#[derive(Debug, Clone)]
pub struct Level {
    m: usize,
    coords: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    vertex_triangles: Vec<Vec<usize>>,
}

impl Level {
    pub fn uniform(m: usize) -> Self {
        let n = m + 1;
        let h = 1.0 / m as f64;
        let mut coords = Vec::with_capacity(n * n);
        let mut boundary = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                coords.push([i as f64 * h, j as f64 * h]);
                boundary.push(i == 0 || j == 0 || i == m || j == m);
            }
        }
        let mut triangles = Vec::with_capacity(2 * m * m);
        for j in 0..m {
            for i in 0..m {
                let v00 = j * n + i;
                let v10 = v00 + 1;
                let v01 = v00 + n;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        let mut vertex_triangles = vec![Vec::new(); n * n];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_triangles[v].push(t);
            }
        }
        Self {
            m,
            coords,
            triangles,
            boundary,
            vertex_triangles,
        }
    }

    /// Subdivisions per side; the mesh width is `1 / m`.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn width(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    /// Triangles incident to vertex `v`.
    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_triangles[v]
    }

    /// Interior vertices in increasing index order.
    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count())
            .filter(|&v| !self.boundary[v])
            .collect()
    }

    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * (self.m + 1) + i
    }

    /// Grid position `(i, j)` of vertex `v`.
    pub fn vertex_position(&self, v: usize) -> (usize, usize) {
        (v % (self.m + 1), v / (self.m + 1))
    }

    pub fn barycenter(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.coords[a], self.coords[b], self.coords[c]);
        [
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
        ]
    }

    pub fn triangle_area(&self) -> f64 {
        0.5 / (self.m * self.m) as f64
    }

    /// A triangle containing the point (ties on shared edges resolved towards
    /// the lower-index cell). Points outside the unit square are clamped.
    pub fn locate(&self, p: [f64; 2]) -> usize {
        let m = self.m as f64;
        let sx = (p[0] * m).clamp(0.0, m);
        let sy = (p[1] * m).clamp(0.0, m);
        let i = (sx.floor() as usize).min(self.m - 1);
        let j = (sy.floor() as usize).min(self.m - 1);
        let (lx, ly) = (sx - i as f64, sy - j as f64);
        let cell = j * self.m + i;
        if lx >= ly {
            2 * cell
        } else {
            2 * cell + 1
        }
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.coords[a], self.coords[b], self.coords[c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let l1 = ((p[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (p[1] - pa[1])) / det;
        let l2 = ((pb[0] - pa[0]) * (p[1] - pa[1]) - (p[0] - pa[0]) * (pb[1] - pa[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }
}

/// A hierarchy of nested uniform triangulations. Level 0 is the coarse mesh,
/// the last level is the fine (reference) mesh.
#[derive(Debug, Clone)]
pub struct TriMesh {
    levels: Vec<Level>,
    parents: Vec<Vec<usize>>,
    fine_ancestors: Vec<usize>,
}

/// Build a hierarchy with `refinements` uniform red refinements of the
/// `coarse_m x coarse_m` mesh.
pub fn build_hierarchy(coarse_m: usize, refinements: usize) -> Result<TriMesh> {
    if coarse_m < 2 || !coarse_m.is_power_of_two() {
        return Err(LodError::InvalidMesh(format!(
            "coarse_m must be a power of two >= 2, got {coarse_m}"
        )));
    }
    if refinements < 1 {
        return Err(LodError::InvalidMesh(
            "at least one refinement is required".into(),
        ));
    }
    let fine_m = coarse_m
        .checked_shl(refinements as u32)
        .filter(|&m| m <= 1 << 14)
        .ok_or_else(|| LodError::InvalidMesh(format!("{refinements} refinements is too many")))?;
    debug_assert!(fine_m >= coarse_m);

    let levels: Vec<Level> = (0..=refinements)
        .map(|l| Level::uniform(coarse_m << l))
        .collect();
    let mut parents = vec![Vec::new()];
    for l in 1..levels.len() {
        let (coarse, fine) = (&levels[l - 1], &levels[l]);
        parents.push(
            (0..fine.triangle_count())
                .map(|t| coarse.locate(fine.barycenter(t)))
                .collect(),
        );
    }
    let fine_ancestors = (0..levels[refinements].triangle_count())
        .map(|t| (1..=refinements).rev().fold(t, |t, l| parents[l][t]))
        .collect();
    Ok(TriMesh {
        levels,
        parents,
        fine_ancestors,
    })
}

impl TriMesh {
    /// Hierarchy spanning `coarse_m` to `fine_m` (both powers of two).
    pub fn from_widths(coarse_m: usize, fine_m: usize) -> Result<Self> {
        if !fine_m.is_power_of_two() || fine_m <= coarse_m || !fine_m.is_multiple_of(coarse_m) {
            return Err(LodError::InvalidMesh(format!(
                "fine_m = {fine_m} must be a power of two strictly finer than coarse_m = {coarse_m}"
            )));
        }
        build_hierarchy(coarse_m, (fine_m / coarse_m).trailing_zeros() as usize)
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> Result<&Level> {
        self.levels.get(l).ok_or(LodError::LevelOutOfRange {
            level: l,
            count: self.levels.len(),
        })
    }

    pub fn coarse(&self) -> &Level {
        &self.levels[0]
    }

    pub fn fine(&self) -> &Level {
        self.levels.last().expect("hierarchy has at least two levels")
    }

    pub fn fine_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// Triangle of level `l - 1` containing triangle `t` of level `l`.
    pub fn parent(&self, l: usize, t: usize) -> usize {
        self.parents[l][t]
    }

    /// Coarse (level 0) ancestor of every fine triangle.
    pub fn fine_to_coarse_triangles(&self) -> &[usize] {
        &self.fine_ancestors
    }

    /// Prolongation from level `from` to the finer (or equal) level `to`.
    ///
    /// The result maps nodal coefficients on `from` to the nodal coefficients
    /// on `to` of the same continuous piecewise-linear function. Both index
    /// spaces include boundary vertices.
    pub fn prolongation(&self, from: usize, to: usize) -> Result<SparseMatrix> {
        let coarse = self.level(from)?;
        let fine = self.level(to)?;
        if from > to {
            return Err(LodError::InvalidMesh(format!(
                "prolongation needs from <= to, got {from} > {to}"
            )));
        }
        let mut triplets = Vec::with_capacity(fine.vertex_count() * 3);
        for (v, &p) in fine.coords().iter().enumerate() {
            let t = coarse.locate(p);
            let bary = coarse.barycentric(t, p);
            for (&cv, &w) in coarse.triangles()[t].iter().zip(&bary) {
                // dyadic coordinates make the weights exact
                if w.abs() > 1e-12 {
                    triplets.push((v, cv, w));
                }
            }
        }
        Ok(SparseMatrix::from_triplets(
            fine.vertex_count(),
            coarse.vertex_count(),
            triplets,
        ))
    }

    /// Nodal patch of `k` coarse element layers around the interior coarse
    /// vertex `x`.
    pub fn node_patch(&self, x: usize, k: usize) -> Result<Patch> {
        let coarse = self.coarse();
        if x >= coarse.vertex_count() || coarse.is_boundary(x) {
            return Err(LodError::NotInterior(x));
        }
        if k < 1 {
            return Err(LodError::InvalidMesh("patch layer count must be >= 1".into()));
        }
        let elements = self.patch_elements(x, k);

        let mut in_patch = vec![false; coarse.triangle_count()];
        for &t in &elements {
            in_patch[t] = true;
        }
        let fine = self.fine();
        let ancestors = self.fine_to_coarse_triangles();
        let interior_fine_dofs = (0..fine.vertex_count())
            .filter(|&v| {
                !fine.is_boundary(v)
                    && fine
                        .vertex_triangles(v)
                        .iter()
                        .all(|&t| in_patch[ancestors[t]])
            })
            .collect();
        Ok(Patch {
            center: x,
            k,
            elements,
            interior_fine_dofs,
        })
    }

    fn patch_elements(&self, x: usize, k: usize) -> Vec<usize> {
        let coarse = self.coarse();
        let mut in_patch = vec![false; coarse.triangle_count()];
        let mut elements: Vec<usize> = coarse.vertex_triangles(x).to_vec();
        for &t in &elements {
            in_patch[t] = true;
        }
        for _ in 1..k {
            let mut closure = vec![false; coarse.vertex_count()];
            for &t in &elements {
                for &v in &coarse.triangles()[t] {
                    closure[v] = true;
                }
            }
            for (v, _) in closure.iter().enumerate().filter(|(_, &c)| c) {
                for &t in coarse.vertex_triangles(v) {
                    if !in_patch[t] {
                        in_patch[t] = true;
                        elements.push(t);
                    }
                }
            }
            if elements.len() == coarse.triangle_count() {
                break;
            }
        }
        elements.sort_unstable();
        elements
    }

    /// Smallest layer count whose patch around `x` covers the whole domain.
    pub fn saturation_layers(&self, x: usize) -> Result<usize> {
        let coarse = self.coarse();
        if x >= coarse.vertex_count() || coarse.is_boundary(x) {
            return Err(LodError::NotInterior(x));
        }
        let total = coarse.triangle_count();
        Ok((1..)
            .find(|&k| self.patch_elements(x, k).len() == total)
            .expect("patches saturate"))
    }

    /// Interior coarse vertex nearest to the domain center.
    pub fn central_vertex(&self) -> usize {
        let c = self.coarse();
        let half = c.m() / 2;
        c.vertex_index(half, half)
    }
}

/// A `k`-layer nodal patch on the coarse mesh with its fine-level interior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub center: usize,
    pub k: usize,
    /// Sorted coarse triangle ids.
    pub elements: Vec<usize>,
    /// Sorted fine vertex ids strictly inside the patch and off the boundary.
    pub interior_fine_dofs: Vec<usize>,
}

impl Patch {
    pub fn is_saturated(&self, mesh: &TriMesh) -> bool {
        self.elements.len() == mesh.coarse().triangle_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeSet, VecDeque};

    #[test]
    fn counts_match_closed_formulas() {
        let mesh = build_hierarchy(2, 1).unwrap();
        let c = mesh.coarse();
        assert_eq!(c.vertex_count(), 9);
        assert_eq!(c.triangle_count(), 8);
        assert_eq!(c.interior_vertices().len(), 1);
        assert_eq!(mesh.fine().vertex_count(), 25);
        assert_eq!(mesh.fine().triangle_count(), 32);

        let mesh = build_hierarchy(8, 3).unwrap();
        assert_eq!(mesh.fine().m(), 64);
        assert_eq!(mesh.fine().vertex_count(), 4225);
        for l in 0..mesh.level_count() {
            let lv = mesh.level(l).unwrap();
            let m = lv.m();
            assert_eq!(lv.vertex_count(), (m + 1) * (m + 1));
            assert_eq!(lv.triangle_count(), 2 * m * m);
            assert_eq!(lv.interior_vertices().len(), (m - 1) * (m - 1));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_hierarchy(2, 0).is_err());
        assert!(build_hierarchy(1, 2).is_err());
        assert!(build_hierarchy(6, 1).is_err());
        assert!(mesh_level_err());
    }

    fn mesh_level_err() -> bool {
        let mesh = build_hierarchy(2, 1).unwrap();
        matches!(mesh.level(5), Err(LodError::LevelOutOfRange { .. }))
            && mesh.prolongation(0, 3).is_err()
            && mesh.prolongation(1, 0).is_err()
    }

    #[test]
    fn boundary_flags_are_exactly_the_square_boundary() {
        let mesh = build_hierarchy(4, 1).unwrap();
        let f = mesh.fine();
        for (v, p) in f.coords().iter().enumerate() {
            let on = p[0] == 0.0 || p[1] == 0.0 || p[0] == 1.0 || p[1] == 1.0;
            assert_eq!(f.is_boundary(v), on);
        }
    }

    #[test]
    fn triangles_are_congruent_and_positively_oriented() {
        let lv = Level::uniform(4);
        for tri in lv.triangles() {
            let [a, b, c] = tri.map(|v| lv.coords()[v]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            assert!((0.5 * det - lv.triangle_area()).abs() < 1e-15);
        }
    }

    #[test]
    fn refinement_is_nested() {
        let mesh = build_hierarchy(2, 2).unwrap();
        for l in 1..mesh.level_count() {
            let (c, f) = (mesh.level(l - 1).unwrap(), mesh.level(l).unwrap());
            let mut children = vec![0; c.triangle_count()];
            for t in 0..f.triangle_count() {
                let parent = mesh.parent(l, t);
                children[parent] += 1;
                for &v in &f.triangles()[t] {
                    let b = c.barycentric(parent, f.coords()[v]);
                    assert!(b.iter().all(|&x| x >= -1e-14), "fine vertex outside parent");
                }
            }
            assert!(children.iter().all(|&n| n == 4));
        }
    }

    #[test]
    fn prolongation_of_hat_and_constants() {
        let mesh = build_hierarchy(2, 1).unwrap();
        let p = mesh.prolongation(0, 1).unwrap();
        let (c, f) = (mesh.coarse(), mesh.fine());
        let x = c.vertex_index(1, 1);
        let mut hat = vec![0.0; c.vertex_count()];
        hat[x] = 1.0;
        let fine_hat = p.mul_vec(&hat);
        // center of the square is at fine (2, 2)
        assert_eq!(fine_hat[f.vertex_index(2, 2)], 1.0);
        for (i, j) in [(1, 2), (3, 2), (2, 1), (2, 3), (1, 1), (3, 3)] {
            assert_eq!(fine_hat[f.vertex_index(i, j)], 0.5, "midpoint ({i},{j})");
        }
        // across the anti-diagonal the hat is not supported
        assert_eq!(fine_hat[f.vertex_index(1, 3)], 0.0);
        assert_eq!(fine_hat[f.vertex_index(3, 1)], 0.0);
        assert_eq!(fine_hat.iter().filter(|&&v| v != 0.0).count(), 7);

        let ones = p.mul_vec(&vec![1.0; c.vertex_count()]);
        assert!(ones.iter().all(|&v| v == 1.0));

        let id = mesh.prolongation(1, 1).unwrap();
        let v: Vec<f64> = (0..f.vertex_count()).map(|i| i as f64).collect();
        assert_eq!(id.mul_vec(&v), v);
    }

    #[test]
    fn interior_patch_has_six_triangles() {
        let mesh = build_hierarchy(8, 1).unwrap();
        let x = mesh.central_vertex();
        let patch = mesh.node_patch(x, 1).unwrap();
        assert_eq!(patch.elements.len(), 6);
        assert_eq!(patch.elements, {
            let mut s = mesh.coarse().vertex_triangles(x).to_vec();
            s.sort();
            s
        });
        // one refinement: the hat support has 7 interior fine vertices
        assert_eq!(patch.interior_fine_dofs.len(), 7);
    }

    /// Breadth-first closure over the element-vertex incidence graph.
    fn bfs_patch(level: &Level, x: usize, k: usize) -> BTreeSet<usize> {
        let mut depth = vec![usize::MAX; level.vertex_count()];
        let mut queue = VecDeque::new();
        depth[x] = 0;
        queue.push_back(x);
        // vertex graph distance via shared triangles
        while let Some(v) = queue.pop_front() {
            for &t in level.vertex_triangles(v) {
                for &w in &level.triangles()[t] {
                    if depth[w] == usize::MAX {
                        depth[w] = depth[v] + 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        // a triangle is in the k-patch iff it has a vertex within k-1 steps of x
        (0..level.triangle_count())
            .filter(|&t| level.triangles()[t].iter().any(|&v| depth[v] < k))
            .collect()
    }

    #[test]
    fn patches_match_bfs_oracle() {
        let mesh = build_hierarchy(8, 1).unwrap();
        let c = mesh.coarse();
        for x in c.interior_vertices() {
            for k in 1..=5 {
                let patch = mesh.node_patch(x, k).unwrap();
                let oracle = bfs_patch(c, x, k);
                assert_eq!(patch.elements, oracle.into_iter().collect::<Vec<_>>());
            }
        }
        let center = mesh.central_vertex();
        // k = 2 around an interior vertex: every triangle touching the hexagon
        assert_eq!(mesh.node_patch(center, 2).unwrap().elements.len(), 24);
    }

    #[test]
    fn patches_nest_and_saturate() {
        let mesh = build_hierarchy(8, 1).unwrap();
        let c = mesh.coarse();
        let total = c.triangle_count();
        for x in c.interior_vertices() {
            let sat = mesh.saturation_layers(x).unwrap();
            // the anti-diagonal costs two vertex steps, so corners need 2m - 2
            assert!(sat <= 14);
            let mut prev: Option<Patch> = None;
            for k in 1..=sat {
                let p = mesh.node_patch(x, k).unwrap();
                if let Some(prev) = &prev {
                    assert!(prev.elements.iter().all(|t| p.elements.contains(t)));
                    assert!(prev
                        .interior_fine_dofs
                        .iter()
                        .all(|v| p.interior_fine_dofs.contains(v)));
                }
                prev = Some(p);
            }
            let p = prev.unwrap();
            assert_eq!(p.elements.len(), total);
            assert_eq!(p.interior_fine_dofs, mesh.fine().interior_vertices());
        }
        let corner = c.vertex_index(1, 1);
        assert_eq!(mesh.node_patch(corner, 20).unwrap().elements.len(), total);
        assert_eq!(mesh.saturation_layers(c.vertex_index(1, 7)).unwrap(), 14);
        assert_eq!(mesh.saturation_layers(mesh.central_vertex()).unwrap(), 8);
        assert!(matches!(mesh.node_patch(0, 1), Err(LodError::NotInterior(0))));
        assert!(mesh.node_patch(corner, 0).is_err());
    }
}
