//! Constrained solves through the KKT system
//!
//! ```text
//! [ K  C^T ] [ phi ]   [ r ]
//! [ C   0  ] [ mu  ] = [ 0 ]
//! ```
//!
//! factored once by sparse LU with partial pivoting and reusable for many
//! right-hand sides.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use super::sparse::{norm2, norm_inf, SparseMatrix};
use super::{SolveMethod, SolveReport};
use crate::error::{LodError, Result};

/// Relative KKT residual accepted after refinement.
pub const KKT_TOL: f64 = 1e-8;
/// `|C phi|_inf <= CONSTRAINT_TOL * |phi|_inf`.
pub const CONSTRAINT_TOL: f64 = 1e-10;

const REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub phi: Vec<f64>,
    /// One multiplier per row of the original `C`; pruned rows get zero.
    pub mu: Vec<f64>,
    pub report: SolveReport,
}

/// A factored KKT matrix.
pub struct SaddleFactorization {
    k: SparseMatrix,
    c: SparseMatrix,
    kept_rows: Vec<usize>,
    constraint_rows: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SaddleFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaddleFactorization")
            .field("unknowns", &self.k.rows())
            .field("constraints", &self.c.rows())
            .field("pruned", &(self.constraint_rows - self.c.rows()))
            .finish()
    }
}

impl SaddleFactorization {
    pub fn new(k: &SparseMatrix, c: &SparseMatrix) -> Result<Self> {
        let n = k.rows();
        if k.cols() != n || c.cols() != n {
            return Err(LodError::Dimension(format!(
                "saddle system with K {}x{} and C {}x{}",
                k.rows(),
                k.cols(),
                c.rows(),
                c.cols()
            )));
        }
        let kept_rows = c.nonzero_rows();
        let all: Vec<usize> = (0..n).collect();
        let pruned = c.select(&kept_rows, &all);
        let m = pruned.rows();
        if m > n {
            return Err(LodError::RankDeficient(format!(
                "{m} constraints on {n} unknowns"
            )));
        }

        let mut triplets: Vec<Triplet<usize, usize, f64>> =
            Vec::with_capacity(k.nnz() + 2 * pruned.nnz());
        triplets.extend(k.triplets().map(|(i, j, v)| Triplet::new(i, j, v)));
        for (i, j, v) in pruned.triplets() {
            triplets.push(Triplet::new(n + i, j, v));
            triplets.push(Triplet::new(j, n + i, v));
        }
        let kkt = SparseColMat::<usize, f64>::try_new_from_triplets(n + m, n + m, &triplets)
            .map_err(|e| LodError::Singular(format!("KKT assembly failed: {e:?}")))?;
        let lu = match kkt.sp_lu() {
            Ok(lu) => lu,
            Err(e) => return Err(diagnose(&pruned, format!("sparse LU failed: {e:?}"))),
        };
        Ok(Self {
            k: k.clone(),
            c: pruned,
            kept_rows,
            constraint_rows: c.rows(),
            lu,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.k.rows()
    }

    /// Number of constraints that survived zero-row pruning.
    pub fn active_constraints(&self) -> usize {
        self.c.rows()
    }

    pub fn solve(&self, r: &[f64]) -> Result<SaddleSolution> {
        let n = self.k.rows();
        let m = self.c.rows();
        if r.len() != n {
            return Err(LodError::Dimension(format!(
                "right-hand side of length {} for {n} unknowns",
                r.len()
            )));
        }
        let r_norm = norm2(r);
        if r_norm == 0.0 {
            return Ok(SaddleSolution {
                phi: vec![0.0; n],
                mu: vec![0.0; self.constraint_rows],
                report: SolveReport::new(SolveMethod::SparseLu, 0, 0.0),
            });
        }

        let rhs = Col::<f64>::from_fn(n + m, |i| if i < n { r[i] } else { 0.0 });
        let mut sol = self.lu.solve(&rhs);
        let mut x: Vec<f64> = (0..n + m).map(|i| sol[i]).collect();
        let mut residual = self.residual(&x, r);
        let mut res_norm = norm2(&residual) / r_norm;
        for _ in 0..REFINEMENT_STEPS {
            if !res_norm.is_finite() || res_norm <= 1e-14 {
                break;
            }
            let corr = Col::<f64>::from_fn(n + m, |i| residual[i]);
            sol = self.lu.solve(&corr);
            let candidate: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + sol[i]).collect();
            let cand_residual = self.residual(&candidate, r);
            let cand_norm = norm2(&cand_residual) / r_norm;
            if !(cand_norm < res_norm) {
                break;
            }
            x = candidate;
            residual = cand_residual;
            res_norm = cand_norm;
        }

        if !x.iter().all(|v| v.is_finite()) || !(res_norm <= KKT_TOL) {
            return Err(diagnose(
                &self.c,
                format!("KKT residual {res_norm:e} after refinement"),
            ));
        }
        let phi = x[..n].to_vec();
        let cphi = self.c.mul_vec(&phi);
        // phi may vanish when the constraints pin every dof, so measure it
        // against the size r / diag(K) as well
        let k_diag = self.k.diagonal().iter().fold(0.0_f64, |a, d| a.max(d.abs()));
        let scale = norm_inf(&phi).max(norm_inf(r) / k_diag);
        if norm_inf(&cphi) > CONSTRAINT_TOL * scale {
            return Err(LodError::Singular(format!(
                "constraint residual {:e} exceeds {CONSTRAINT_TOL:e} * {scale:e}",
                norm_inf(&cphi)
            )));
        }
        let mut mu = vec![0.0; self.constraint_rows];
        for (p, &row) in self.kept_rows.iter().enumerate() {
            mu[row] = x[n + p];
        }
        Ok(SaddleSolution {
            phi,
            mu,
            report: SolveReport::new(SolveMethod::SparseLu, 0, res_norm),
        })
    }

    /// `[r; 0] - KKT * x`.
    fn residual(&self, x: &[f64], r: &[f64]) -> Vec<f64> {
        let n = self.k.rows();
        let (phi, mu) = x.split_at(n);
        let kphi = self.k.mul_vec(phi);
        let ctmu = self.c.mul_transpose_vec(mu);
        let cphi = self.c.mul_vec(phi);
        let mut res: Vec<f64> = (0..n).map(|i| r[i] - kphi[i] - ctmu[i]).collect();
        res.extend(cphi.iter().map(|v| -v));
        res
    }
}

/// Solve the KKT system for a single right-hand side. Zero rows of `C` are
/// pruned first.
pub fn saddle_solve(k: &SparseMatrix, c: &SparseMatrix, r: &[f64]) -> Result<SaddleSolution> {
    SaddleFactorization::new(k, c)?.solve(r)
}

/// Distinguish a rank-deficient constraint block from a singular `K` by a
/// pivoted Cholesky attempt on `C C^T`.
fn diagnose(c: &SparseMatrix, context: String) -> LodError {
    let m = c.rows();
    if m == 0 {
        return LodError::Singular(context);
    }
    let cct = match c.matmul(&c.transpose()) {
        Ok(p) => p.to_dense(),
        Err(e) => return e,
    };
    let scale = (0..m).map(|i| cct[i][i]).fold(0.0, f64::max);
    let mut a = cct;
    for j in 0..m {
        let mut d = a[j][j];
        for l in 0..j {
            d -= a[j][l] * a[j][l];
        }
        if d <= 1e-12 * scale {
            return LodError::RankDeficient(format!(
                "constraint block has dependent rows (pivot {j} of {m}); {context}"
            ));
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..m {
            let mut s = a[i][j];
            for l in 0..j {
                s -= a[i][l] * a[j][l];
            }
            a[i][j] = s / d;
        }
    }
    LodError::Singular(context)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_reduces_to_plain_solve() {
        let k = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (1, 1, 4.0)]);
        let c = SparseMatrix::zeros(0, 2);
        let s = saddle_solve(&k, &c, &[2.0, 2.0]).unwrap();
        assert_eq!(s.phi, vec![1.0, 0.5]);
        assert!(s.mu.is_empty());
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let k = SparseMatrix::identity(2);
        let c = SparseMatrix::from_triplets(1, 2, vec![(0, 0, 1.0), (0, 1, 1.0)]);
        let s = saddle_solve(&k, &c, &[0.0, 0.0]).unwrap();
        assert_eq!(s.phi, vec![0.0, 0.0]);
        assert_eq!(s.mu, vec![0.0]);
    }

    #[test]
    fn hand_solved_kkt() {
        // [1 0 1; 0 1 1; 1 1 0] [p0 p1 mu] = [1 0 0]
        // p0 + p1 = 0, p0 + mu = 1, p1 + mu = 0  =>  p0 = 1/2, p1 = -1/2, mu = 1/2
        let k = SparseMatrix::identity(2);
        let c = SparseMatrix::from_triplets(1, 2, vec![(0, 0, 1.0), (0, 1, 1.0)]);
        let s = saddle_solve(&k, &c, &[1.0, 0.0]).unwrap();
        assert!((s.phi[0] - 0.5).abs() < 1e-15);
        assert!((s.phi[1] + 0.5).abs() < 1e-15);
        assert!((s.mu[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_rows_are_pruned_and_get_zero_multipliers() {
        let k = SparseMatrix::identity(2);
        let c = SparseMatrix::from_triplets(3, 2, vec![(1, 0, 1.0), (1, 1, 1.0), (2, 0, 0.0)]);
        let f = SaddleFactorization::new(&k, &c).unwrap();
        assert_eq!(f.active_constraints(), 1);
        let s = f.solve(&[1.0, 0.0]).unwrap();
        assert_eq!(s.mu.len(), 3);
        assert_eq!(s.mu[0], 0.0);
        assert!((s.mu[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dependent_constraints_are_reported() {
        let k = SparseMatrix::identity(3);
        let c = SparseMatrix::from_triplets(
            2,
            3,
            vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 2.0), (1, 1, 2.0)],
        );
        let err = saddle_solve(&k, &c, &[1.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, LodError::RankDeficient(_)), "{err}");
    }

    #[test]
    fn solution_satisfies_both_blocks() {
        // 1D Laplacian with two averaging constraints
        let n = 12;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let k = SparseMatrix::from_triplets(n, n, t);
        let c = SparseMatrix::from_triplets(
            2,
            n,
            (0..6).map(|j| (0, j, 1.0)).chain((4..n).map(|j| (1, j, 0.5))),
        );
        let r: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let s = saddle_solve(&k, &c, &r).unwrap();
        let kphi = k.mul_vec(&s.phi);
        let ctmu = c.mul_transpose_vec(&s.mu);
        for i in 0..n {
            assert!((kphi[i] + ctmu[i] - r[i]).abs() < 1e-12);
        }
        assert!(norm_inf(&c.mul_vec(&s.phi)) < 1e-12);
        assert!(s.report.relative_residual <= KKT_TOL);
    }
}
