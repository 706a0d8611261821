//! Dense reference computations shared by the integration tests.
#![allow(dead_code)]

use lod::{AssembledProblem, InterpolationMatrix, SparseMatrix, TriMesh};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub fn dense(a: &SparseMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.rows(), a.cols());
    for i in 0..a.rows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            d[(i, j)] += v;
        }
    }
    d
}

/// Orthonormal basis (columns) of the free-dof fine functions whose Clément
/// interpolant vanishes, from the eigenvectors of `P^T P` with zero eigenvalue.
pub fn kernel_basis(problem: &AssembledProblem, clement: &InterpolationMatrix) -> DMatrix<f64> {
    let all: Vec<usize> = (0..clement.coarse_count()).collect();
    let p = dense(&clement.matrix.select(&all, &problem.free_dofs));
    let eig = SymmetricEigen::new(p.transpose() * &p);
    let top = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
    let cols: Vec<DVector<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l < 1e-12 * top)
        .map(|(i, _)| eig.eigenvectors.column(i).into_owned())
        .collect();
    assert_eq!(
        cols.len(),
        problem.free_count() - clement.coarse_count(),
        "interpolation is not surjective"
    );
    DMatrix::from_columns(&cols)
}

/// Reduced solves on the interpolation kernel.
pub struct KernelOracle {
    pub k: DMatrix<f64>,
    pub n: DMatrix<f64>,
    reduced: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl KernelOracle {
    pub fn new(problem: &AssembledProblem, clement: &InterpolationMatrix) -> Self {
        let k = dense(&problem.stiffness);
        let n = kernel_basis(problem, clement);
        let reduced = (n.transpose() * &k * &n).cholesky().expect("reduced system is SPD");
        Self { k, n, reduced }
    }

    /// `a`-orthogonal projection of `v` (free dofs) onto the kernel.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let rhs = self.n.transpose() * (&self.k * v);
        &self.n * self.reduced.solve(&rhs)
    }

    /// Global corrector of the coarse hat at `x`.
    pub fn corrector(&self, mesh: &TriMesh, problem: &AssembledProblem, x: usize) -> DVector<f64> {
        let pro = mesh.prolongation(0, mesh.fine_level()).unwrap();
        let mut hat = vec![0.0; mesh.coarse().vertex_count()];
        hat[x] = 1.0;
        let fine = pro.mul_vec(&hat);
        let free: Vec<f64> = problem.free_dofs.iter().map(|&v| fine[v]).collect();
        self.project(&DVector::from_vec(free))
    }

    /// Ideal multiscale solution `u_h - Pi_f u_h` with a dense reference solve.
    pub fn ideal_solution(&self, problem: &AssembledProblem) -> DVector<f64> {
        let b = DVector::from_vec(problem.load.clone());
        let uh = self.k.clone().cholesky().expect("stiffness is SPD").solve(&b);
        let fine_part = &self.n * self.reduced.solve(&(self.n.transpose() * &b));
        uh - fine_part
    }

    pub fn energy(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.k * v)).max(0.0).sqrt()
    }
}
