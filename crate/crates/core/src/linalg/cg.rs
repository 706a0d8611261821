use super::sparse::{dot, norm2, SparseMatrix};
use super::{SolveMethod, SolveReport};
use crate::error::{LodError, Result};

/// Default relative residual for SPD solves.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Iteration cap as a multiple of the system size.
const ITERATION_FACTOR: usize = 20;

/// Solve `K x = b` for symmetric positive definite `K` with Jacobi-preconditioned
/// conjugate gradients, starting from zero.
///
/// On success the returned report carries the recomputed (not recursive)
/// relative residual `|b - K x| / |b|`, which is at most `tol`.
pub fn spd_solve(k: &SparseMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    let n = k.rows();
    if k.cols() != n || b.len() != n {
        return Err(LodError::Dimension(format!(
            "spd_solve: matrix {}x{}, right-hand side {}",
            k.rows(),
            k.cols(),
            b.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(LodError::Config(format!("tolerance must be positive, got {tol}")));
    }
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, SolveReport::new(SolveMethod::ConjugateGradient, 0, 0.0)));
    }

    let inv_diag: Vec<f64> = k
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let cap = ITERATION_FACTOR * n.max(1);

    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut kp = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;

    loop {
        k.mul_vec_into(&p, &mut kp);
        let pkp = dot(&p, &kp);
        if !(pkp > 0.0) {
            return Err(LodError::Singular(format!(
                "conjugate gradients met non-positive curvature {pkp:e} at iteration {iterations}"
            )));
        }
        let alpha = rz / pkp;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        iterations += 1;

        if norm2(&r) <= tol * b_norm {
            // guard against drift of the recursive residual
            k.mul_vec_into(&x, &mut kp);
            for i in 0..n {
                r[i] = b[i] - kp[i];
            }
            let true_residual = norm2(&r) / b_norm;
            if true_residual <= tol {
                return Ok((
                    x,
                    SolveReport::new(SolveMethod::ConjugateGradient, iterations, true_residual),
                ));
            }
            // restart from the current iterate with the true residual
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        if iterations >= cap {
            return Err(LodError::NotConverged {
                iterations,
                residual: norm2(&r) / b_norm,
            });
        }

        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    #[test]
    fn identity_returns_rhs() {
        let k = SparseMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        let (x, report) = spd_solve(&k, &b, 1e-12).unwrap();
        assert_eq!(x, b);
        assert_eq!(report.iterations, 1);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let k = SparseMatrix::identity(3);
        let (x, report) = spd_solve(&k, &[0.0; 3], 1e-10).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn random_spd_meets_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10;
        let g: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| uniform(&mut rng)).collect()).collect();
        // K = G^T G + n I
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut v: f64 = (0..n).map(|l| g[l][i] * g[l][j]).sum();
                if i == j {
                    v += n as f64;
                }
                triplets.push((i, j, v));
            }
        }
        let k = SparseMatrix::from_triplets(n, n, triplets);
        let b: Vec<f64> = (0..n).map(|_| uniform(&mut rng)).collect();
        let tol = 1e-10;
        let (x, report) = spd_solve(&k, &b, tol).unwrap();
        let kx = k.mul_vec(&x);
        let res: f64 = kx.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / norm2(&b);
        assert!(res <= tol);
        assert!((res - report.relative_residual).abs() <= 1e-14);
    }

    #[test]
    fn errors_are_reported() {
        let k = SparseMatrix::identity(3);
        assert!(matches!(spd_solve(&k, &[1.0; 2], 1e-8), Err(LodError::Dimension(_))));
        assert!(spd_solve(&k, &[1.0; 3], 0.0).is_err());
        let neg = SparseMatrix::from_triplets(2, 2, vec![(0, 0, -1.0), (1, 1, 1.0)]);
        assert!(spd_solve(&neg, &[1.0, 0.0], 1e-8).is_err());
    }
}
