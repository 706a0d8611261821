//! P1 assembly with a cell-wise constant coefficient, homogeneous Dirichlet
//! elimination, discrete norms and Galerkin solves.

use std::str::FromStr;

use crate::coefficient::CoefficientField;
use crate::error::{LodError, Result};
use crate::linalg::{dot, spd_solve, SolveReport, SparseMatrix};
use crate::mesh::{Level, TriMesh};

/// Right-hand side `g`. Only constant loads are supported; they are
/// integrated exactly against the P1 basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadSpec {
    Constant(f64),
}

impl FromStr for LoadSpec {
    type Err = LodError;

    /// Accepts `1`, `const:1` or `constant:1`.
    fn from_str(s: &str) -> Result<Self> {
        let value = s
            .strip_prefix("constant:")
            .or_else(|| s.strip_prefix("const:"))
            .unwrap_or(s);
        value
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(LoadSpec::Constant)
            .ok_or_else(|| LodError::Config(format!("unknown load spec `{s}`")))
    }
}

impl std::fmt::Display for LoadSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadSpec::Constant(g) => write!(f, "const:{g}"),
        }
    }
}

/// Nodal coefficients of a P1 function on one mesh level, boundary included.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub level: usize,
    pub values: Vec<f64>,
}

impl FieldVector {
    pub fn zeros(level: usize, vertices: usize) -> Self {
        Self {
            level,
            values: vec![0.0; vertices],
        }
    }
}

/// Linear system of a P1 discretization on one level after eliminating the
/// boundary vertices.
#[derive(Debug, Clone)]
pub struct AssembledProblem {
    pub level: usize,
    pub m: usize,
    /// Interior vertex ids; position in this list is the free-dof index.
    pub free_dofs: Vec<usize>,
    dof_of_vertex: Vec<Option<usize>>,
    pub stiffness: SparseMatrix,
    pub mass: SparseMatrix,
    pub load: Vec<f64>,
    pub stiffness_full: SparseMatrix,
    pub mass_full: SparseMatrix,
    pub element_coefficients: Vec<f64>,
}

fn element_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let area = 0.5 * det.abs();
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
    }
    (g, area)
}

/// Full P1 mass matrix of a level, boundary vertices included.
pub fn assemble_mass(level: &Level) -> SparseMatrix {
    let mut triplets = Vec::with_capacity(9 * level.triangle_count());
    let area = level.triangle_area();
    for tri in level.triangles() {
        for (a, &i) in tri.iter().enumerate() {
            for (b, &j) in tri.iter().enumerate() {
                let w = if a == b { area / 6.0 } else { area / 12.0 };
                triplets.push((i, j, w));
            }
        }
    }
    SparseMatrix::from_triplets(level.vertex_count(), level.vertex_count(), triplets)
        .into_symmetric()
        .expect("mass matrix is symmetric")
}

fn assemble_stiffness(level: &Level, coefficients: &[f64]) -> SparseMatrix {
    let mut triplets = Vec::with_capacity(9 * level.triangle_count());
    for (tri, &a_t) in level.triangles().iter().zip(coefficients) {
        let (g, area) = element_gradients(tri.map(|v| level.coords()[v]));
        for (a, &i) in tri.iter().enumerate() {
            for (b, &j) in tri.iter().enumerate() {
                let v = a_t * area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                triplets.push((i, j, v));
            }
        }
    }
    // element matrices are symmetric, but summation order differs between
    // (i, j) and (j, i) in general
    SparseMatrix::from_triplets(level.vertex_count(), level.vertex_count(), triplets).symmetrized()
}

/// Assemble stiffness, mass and load on `level` of the hierarchy.
pub fn assemble(
    mesh: &TriMesh,
    level: usize,
    field: &CoefficientField,
    load: LoadSpec,
) -> Result<AssembledProblem> {
    let lv = mesh.level(level)?;
    let element_coefficients = field.sample_on_elements(lv)?;
    let stiffness_full = assemble_stiffness(lv, &element_coefficients);
    let mass_full = assemble_mass(lv);

    let free_dofs = lv.interior_vertices();
    let mut dof_of_vertex = vec![None; lv.vertex_count()];
    for (d, &v) in free_dofs.iter().enumerate() {
        dof_of_vertex[v] = Some(d);
    }
    let LoadSpec::Constant(g) = load;
    let mut load_full = vec![0.0; lv.vertex_count()];
    for tri in lv.triangles() {
        for &v in tri {
            load_full[v] += g * lv.triangle_area() / 3.0;
        }
    }
    let load = free_dofs.iter().map(|&v| load_full[v]).collect();

    Ok(AssembledProblem {
        level,
        m: lv.m(),
        stiffness: stiffness_full.select(&free_dofs, &free_dofs),
        mass: mass_full.select(&free_dofs, &free_dofs),
        free_dofs,
        dof_of_vertex,
        load,
        stiffness_full,
        mass_full,
        element_coefficients,
    })
}

impl AssembledProblem {
    pub fn free_count(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.dof_of_vertex.len()
    }

    pub fn dof_of_vertex(&self, v: usize) -> Option<usize> {
        self.dof_of_vertex[v]
    }

    fn check_level(&self, v: &FieldVector) -> Result<()> {
        if v.level != self.level || v.values.len() != self.vertex_count() {
            return Err(LodError::Dimension(format!(
                "field on level {} with {} values, problem on level {} with {} vertices",
                v.level,
                v.values.len(),
                self.level,
                self.vertex_count()
            )));
        }
        Ok(())
    }

    /// Free-dof part of a field.
    pub fn restrict(&self, v: &FieldVector) -> Result<Vec<f64>> {
        self.check_level(v)?;
        Ok(self.free_dofs.iter().map(|&i| v.values[i]).collect())
    }

    /// Extension by zero on the boundary.
    pub fn extend(&self, free: &[f64]) -> FieldVector {
        assert_eq!(free.len(), self.free_count());
        let mut values = vec![0.0; self.vertex_count()];
        for (&v, &x) in self.free_dofs.iter().zip(free) {
            values[v] = x;
        }
        FieldVector {
            level: self.level,
            values,
        }
    }

    pub fn energy_norm_free(&self, v: &[f64]) -> f64 {
        dot(v, &self.stiffness.mul_vec(v)).max(0.0).sqrt()
    }

    pub fn l2_norm_free(&self, v: &[f64]) -> f64 {
        dot(v, &self.mass.mul_vec(v)).max(0.0).sqrt()
    }

    /// Submatrix of the prolongation that maps interior coarse vertices to
    /// the free dofs of this level.
    pub fn restrict_prolongation(
        &self,
        prolongation: &SparseMatrix,
        coarse_interior: &[usize],
    ) -> SparseMatrix {
        prolongation.select(&self.free_dofs, coarse_interior)
    }
}

/// `|||v||| = sqrt(v^T K v)` over free dofs.
pub fn energy_norm(problem: &AssembledProblem, v: &FieldVector) -> Result<f64> {
    Ok(problem.energy_norm_free(&problem.restrict(v)?))
}

/// `||v||_{L2} = sqrt(v^T M v)` over free dofs.
pub fn l2_norm(problem: &AssembledProblem, v: &FieldVector) -> Result<f64> {
    Ok(problem.l2_norm_free(&problem.restrict(v)?))
}

/// Discrete solution on the problem's own level.
pub fn solve_galerkin(problem: &AssembledProblem, tol: f64) -> Result<(FieldVector, SolveReport)> {
    let (x, report) = spd_solve(&problem.stiffness, &problem.load, tol)?;
    Ok((problem.extend(&x), report))
}

/// Galerkin solution in the span of the columns of `basis` (free dofs x
/// basis size): solves `(B^T K B) c = B^T b`.
#[derive(Debug, Clone)]
pub struct SubspaceSolution {
    pub coefficients: Vec<f64>,
    /// `B c` over free dofs.
    pub free_values: Vec<f64>,
    pub system: SparseMatrix,
    pub report: SolveReport,
}

pub fn solve_in_subspace(
    problem: &AssembledProblem,
    basis: &SparseMatrix,
    tol: f64,
) -> Result<SubspaceSolution> {
    if basis.rows() != problem.free_count() {
        return Err(LodError::Dimension(format!(
            "basis has {} rows, problem has {} free dofs",
            basis.rows(),
            problem.free_count()
        )));
    }
    let bt = basis.transpose();
    let system = bt.matmul(&problem.stiffness.matmul(basis)?)?.symmetrized();
    let rhs = bt.mul_vec(&problem.load);
    let (coefficients, report) = spd_solve(&system, &rhs, tol)?;
    let free_values = basis.mul_vec(&coefficients);
    Ok(SubspaceSolution {
        coefficients,
        free_values,
        system,
        report,
    })
}
