//! Localized corrector problems.
//!
//! For an interior coarse vertex `x` and a patch of `k` layers, the corrector
//! `phi_{x,k}` is the fine P1 function supported in the patch interior with
//! vanishing Clément interpolant that satisfies
//! `a(phi_{x,k}, w) = a(lambda_x, w)` for all such `w`. The kernel constraint
//! is imposed with Lagrange multipliers and the KKT system is factored by
//! sparse LU.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{LodError, Result};
use crate::fem::{AssembledProblem, FieldVector};
use crate::interpolation::InterpolationMatrix;
use crate::linalg::{norm_inf, SaddleFactorization, SolveReport, SparseMatrix};
use crate::mesh::{Patch, TriMesh};

/// `|P phi|_inf` bound checked after every solve.
pub const CONSTRAINT_CHECK: f64 = 1e-9;
/// Relative equation residual checked after every solve.
pub const EQUATION_CHECK: f64 = 1e-8;

/// A corrector stored on its support.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCorrector {
    pub vertex: usize,
    /// Fine vertex ids (the patch interior), sorted.
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
    pub report: SolveReport,
}

impl LocalCorrector {
    /// Full fine nodal vector (zero outside the patch interior).
    pub fn to_full(&self, fine_vertices: usize) -> Vec<f64> {
        let mut out = vec![0.0; fine_vertices];
        for (&d, &v) in self.dofs.iter().zip(&self.values) {
            out[d] = v;
        }
        out
    }

    pub fn to_free(&self, problem: &AssembledProblem) -> Vec<f64> {
        let mut out = vec![0.0; problem.free_count()];
        for (&d, &v) in self.dofs.iter().zip(&self.values) {
            out[problem.dof_of_vertex(d).expect("patch dofs are interior")] = v;
        }
        out
    }
}

/// Correctors for every interior coarse vertex, in Clément row order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorSet {
    pub k: usize,
    pub coarse_m: usize,
    pub fine_m: usize,
    pub correctors: Vec<LocalCorrector>,
}

/// Coarse hat at `x` represented on the fine level.
pub fn prolongated_hat(mesh: &TriMesh, prolongation: &SparseMatrix, x: usize) -> FieldVector {
    let mut hat = vec![0.0; mesh.coarse().vertex_count()];
    hat[x] = 1.0;
    FieldVector {
        level: mesh.fine_level(),
        values: prolongation.mul_vec(&hat),
    }
}

struct PatchSystem {
    free_idx: Vec<usize>,
    constraints: SparseMatrix,
}

fn patch_system(
    problem: &AssembledProblem,
    clement: &InterpolationMatrix,
    patch: &Patch,
) -> Result<PatchSystem> {
    let (constraints, _) = clement.constraint_rows(patch)?;
    let free_idx = patch
        .interior_fine_dofs
        .iter()
        .map(|&v| {
            problem
                .dof_of_vertex(v)
                .ok_or_else(|| LodError::Dimension(format!("patch dof {v} is not a free dof")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PatchSystem {
        free_idx,
        constraints,
    })
}

fn factor(problem: &AssembledProblem, system: &PatchSystem) -> Result<SaddleFactorization> {
    let k_loc = problem.stiffness.select(&system.free_idx, &system.free_idx);
    SaddleFactorization::new(&k_loc, &system.constraints)
}

fn solve_on_patch(
    problem: &AssembledProblem,
    patch: &Patch,
    system: &PatchSystem,
    factorization: &SaddleFactorization,
    lambda_free: &[f64],
) -> Result<LocalCorrector> {
    let k_lambda = problem.stiffness.mul_vec(lambda_free);
    let r: Vec<f64> = system.free_idx.iter().map(|&i| k_lambda[i]).collect();
    let sol = factorization.solve(&r)?;

    let constraint = norm_inf(&system.constraints.mul_vec(&sol.phi));
    if constraint > CONSTRAINT_CHECK {
        return Err(LodError::CorrectorCheck {
            vertex: patch.center,
            msg: format!("|I_H phi|_inf = {constraint:e}"),
        });
    }
    if sol.report.relative_residual > EQUATION_CHECK {
        return Err(LodError::CorrectorCheck {
            vertex: patch.center,
            msg: format!("relative KKT residual {:e}", sol.report.relative_residual),
        });
    }
    Ok(LocalCorrector {
        vertex: patch.center,
        dofs: patch.interior_fine_dofs.clone(),
        values: sol.phi,
        report: sol.report,
    })
}

/// Corrector of `lambda_x` (a fine field) on one patch.
pub fn solve_corrector(
    problem: &AssembledProblem,
    clement: &InterpolationMatrix,
    patch: &Patch,
    lambda_x: &FieldVector,
) -> Result<LocalCorrector> {
    let lambda_free = problem.restrict(lambda_x)?;
    let system = patch_system(problem, clement, patch)?;
    let factorization = factor(problem, &system)?;
    solve_on_patch(problem, patch, &system, &factorization, &lambda_free)
}

/// Correctors for all interior coarse vertices with `k` layers.
///
/// Vertices are processed in parallel on the current rayon pool; the result
/// does not depend on scheduling. Saturated patches share one factorization.
pub fn compute_all(
    problem: &AssembledProblem,
    clement: &InterpolationMatrix,
    mesh: &TriMesh,
    k: usize,
) -> Result<CorrectorSet> {
    if k < 1 {
        return Err(LodError::Config("layer count k must be >= 1".into()));
    }
    if problem.level != mesh.fine_level() {
        return Err(LodError::Dimension(format!(
            "correctors need the fine problem (level {}), got level {}",
            mesh.fine_level(),
            problem.level
        )));
    }
    let prolongation = mesh.prolongation(0, mesh.fine_level())?;
    let vertices = &clement.coarse_vertices;
    let patches: Vec<Patch> = vertices
        .iter()
        .map(|&x| mesh.node_patch(x, k))
        .collect::<Result<_>>()?;

    let shared = match patches.iter().find(|p| p.is_saturated(mesh)) {
        Some(p) => {
            let system = patch_system(problem, clement, p)?;
            let factorization = factor(problem, &system)?;
            Some((system, factorization))
        }
        None => None,
    };

    let results: Vec<Result<LocalCorrector>> = patches
        .par_iter()
        .map(|patch| {
            let lambda = prolongated_hat(mesh, &prolongation, patch.center);
            let lambda_free = problem.restrict(&lambda)?;
            match &shared {
                Some((system, f)) if patch.is_saturated(mesh) => {
                    solve_on_patch(problem, patch, system, f, &lambda_free)
                }
                _ => {
                    let system = patch_system(problem, clement, patch)?;
                    let f = factor(problem, &system)?;
                    solve_on_patch(problem, patch, &system, &f, &lambda_free)
                }
            }
        })
        .collect();

    let mut correctors = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    let mut first = None;
    for (res, &x) in results.into_iter().zip(vertices) {
        match res {
            Ok(c) => correctors.push(c),
            Err(e) => {
                failed.push(x);
                first.get_or_insert(e);
            }
        }
    }
    if let Some(first) = first {
        return Err(LodError::CorrectorFailures {
            vertices: failed,
            first: Box::new(first),
        });
    }
    Ok(CorrectorSet {
        k,
        coarse_m: mesh.coarse().m(),
        fine_m: mesh.fine().m(),
        correctors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    pub k: usize,
    /// `|||phi_x - phi_{x,k}|||`.
    pub error: f64,
    /// `|||phi_x|||` of the global corrector.
    pub global_energy: f64,
}

/// Truncation error of the localized corrector at `x` for `k = 1..=k_max`,
/// measured against the corrector on the saturated patch.
pub fn decay_profile(
    problem: &AssembledProblem,
    clement: &InterpolationMatrix,
    mesh: &TriMesh,
    x: usize,
    k_max: usize,
) -> Result<Vec<DecayPoint>> {
    let saturation = mesh.saturation_layers(x)?;
    if k_max < 1 || k_max > saturation {
        return Err(LodError::Config(format!(
            "k_max = {k_max} must lie in 1..={saturation} (saturation at vertex {x})"
        )));
    }
    let prolongation = mesh.prolongation(0, mesh.fine_level())?;
    let lambda = prolongated_hat(mesh, &prolongation, x);
    let global = solve_corrector(problem, clement, &mesh.node_patch(x, saturation)?, &lambda)?;
    let global_free = global.to_free(problem);
    let global_energy = problem.energy_norm_free(&global_free);

    (1..=k_max)
        .map(|k| {
            let local = if k == saturation {
                global.clone()
            } else {
                solve_corrector(problem, clement, &mesh.node_patch(x, k)?, &lambda)?
            };
            let diff: Vec<f64> = global_free
                .iter()
                .zip(local.to_free(problem))
                .map(|(g, l)| g - l)
                .collect();
            Ok(DecayPoint {
                k,
                error: problem.energy_norm_free(&diff),
                global_energy,
            })
        })
        .collect()
}

const CACHE_MAGIC: &[u8; 8] = b"LODCORR\0";
const CACHE_VERSION: u32 = 1;

impl CorrectorSet {
    /// Binary dump: magic, format version, `coarse_m`, `fine_m`, `k`, count,
    /// then per corrector its vertex, support length, support ids and values.
    /// All integers are little-endian `u64` (version `u32`), values `f64`.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        for v in [self.coarse_m, self.fine_m, self.k, self.correctors.len()] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for c in &self.correctors {
            w.write_all(&(c.vertex as u64).to_le_bytes())?;
            w.write_all(&(c.dofs.len() as u64).to_le_bytes())?;
            for &d in &c.dofs {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &v in &c.values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Inverse of [`CorrectorSet::write_to`]. Solve reports are not stored and
    /// come back as direct solves with zero residual.
    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(LodError::Cache("not a corrector cache file".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != CACHE_VERSION {
            return Err(LodError::Cache(format!(
                "unsupported version {version}, expected {CACHE_VERSION}"
            )));
        }
        let read_u64 = |r: &mut dyn Read| -> Result<usize> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            usize::try_from(u64::from_le_bytes(b))
                .map_err(|_| LodError::Cache("integer out of range".into()))
        };
        let coarse_m = read_u64(&mut r)?;
        let fine_m = read_u64(&mut r)?;
        let k = read_u64(&mut r)?;
        let count = read_u64(&mut r)?;
        let max_support = (fine_m + 1).saturating_mul(fine_m + 1);
        let mut correctors = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let vertex = read_u64(&mut r)?;
            let len = read_u64(&mut r)?;
            if len > max_support {
                return Err(LodError::Cache(format!("support of {len} dofs on a {fine_m} mesh")));
            }
            let dofs = (0..len).map(|_| read_u64(&mut r)).collect::<Result<Vec<_>>>()?;
            let values = (0..len)
                .map(|_| {
                    let mut b = [0u8; 8];
                    r.read_exact(&mut b)?;
                    Ok(f64::from_le_bytes(b))
                })
                .collect::<Result<Vec<_>>>()?;
            correctors.push(LocalCorrector {
                vertex,
                dofs,
                values,
                report: SolveReport::new(crate::linalg::SolveMethod::SparseLu, 0, 0.0),
            });
        }
        Ok(Self {
            k,
            coarse_m,
            fine_m,
            correctors,
        })
    }

    /// Check that a loaded set fits the given hierarchy and layer count.
    pub fn matches(&self, mesh: &TriMesh, k: usize) -> bool {
        self.k == k
            && self.coarse_m == mesh.coarse().m()
            && self.fine_m == mesh.fine().m()
            && self.correctors.len() == mesh.coarse().interior_vertices().len()
    }
}
