//! Convergence ladders and corrector decay studies.

use std::time::Instant;

use crate::coefficient::CoefficientField;
use crate::corrector::{compute_all, decay_profile, CorrectorSet, DecayPoint};
use crate::error::{LodError, Result};
use crate::fem::{assemble, solve_galerkin, solve_in_subspace, AssembledProblem, FieldVector, LoadSpec};
use crate::interpolation::{build_clement, InterpolationMatrix};
use crate::lod::{build_basis, errors_vs_reference, relative_errors, ErrorRecord, MultiscaleSolution};
use crate::linalg::SolveReport;
use crate::mesh::TriMesh;

/// Fine problem, reference solution and Clément operator for one hierarchy.
pub struct Experiment {
    pub mesh: TriMesh,
    pub problem: AssembledProblem,
    pub clement: InterpolationMatrix,
    pub reference: FieldVector,
    pub reference_report: SolveReport,
    pub reference_seconds: f64,
}

impl Experiment {
    pub fn new(
        coarse_m: usize,
        fine_m: usize,
        field: &CoefficientField,
        load: LoadSpec,
        tol: f64,
    ) -> Result<Self> {
        let mesh = TriMesh::from_widths(coarse_m, fine_m)?;
        let start = Instant::now();
        let problem = assemble(&mesh, mesh.fine_level(), field, load)?;
        let (reference, reference_report) = solve_galerkin(&problem, tol)?;
        let reference_seconds = start.elapsed().as_secs_f64();
        let clement = build_clement(&mesh)?;
        Ok(Self {
            mesh,
            problem,
            clement,
            reference,
            reference_report,
            reference_seconds,
        })
    }

    pub fn coarse_m(&self) -> usize {
        self.mesh.coarse().m()
    }

    /// Localized correctors with `k` layers.
    pub fn correctors(&self, k: usize) -> Result<CorrectorSet> {
        compute_all(&self.problem, &self.clement, &self.mesh, k)
    }

    /// Layer count at which every patch covers the domain.
    pub fn saturated_layers(&self) -> Result<usize> {
        self.clement
            .coarse_vertices
            .iter()
            .map(|&x| self.mesh.saturation_layers(x))
            .try_fold(1, |acc, k| Ok(acc.max(k?)))
    }

    pub fn multiscale(&self, correctors: &CorrectorSet, tol: f64) -> Result<MultiscaleSolution> {
        let basis = build_basis(&self.mesh, &self.problem, correctors)?;
        crate::lod::solve_lod(&self.mesh, &self.problem, &self.clement, &basis, correctors.k, tol)
    }

    /// Classical coarse P1 Galerkin solution (coarse space embedded in the
    /// fine one, coefficient resolved on the fine mesh).
    pub fn classical(&self, tol: f64) -> Result<(FieldVector, SolveReport)> {
        let prolongation = self.mesh.prolongation(0, self.mesh.fine_level())?;
        let basis = self
            .problem
            .restrict_prolongation(&prolongation, &self.clement.coarse_vertices);
        let sub = solve_in_subspace(&self.problem, &basis, tol)?;
        Ok((self.problem.extend(&sub.free_values), sub.report))
    }
}

/// Wall-clock seconds for the stages of one ladder point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub reference: f64,
    pub correctors: f64,
    pub solve: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub h: f64,
    pub k: usize,
    pub n_dof: usize,
    pub lod: ErrorRecord,
    pub p1_energy: f64,
    pub p1_l2: f64,
    pub lod_iterations: usize,
    pub reference_iterations: usize,
    pub timings: Timings,
}

/// One ladder point: reference, LOD with `k` layers and classical P1.
pub fn ladder_point(
    coarse_m: usize,
    fine_m: usize,
    field: &CoefficientField,
    load: LoadSpec,
    k: usize,
    tol: f64,
) -> Result<(LadderRow, Experiment, MultiscaleSolution)> {
    let exp = Experiment::new(coarse_m, fine_m, field, load, tol)?;
    let start = Instant::now();
    let correctors = exp.correctors(k)?;
    let t_correctors = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let sol = exp.multiscale(&correctors, tol)?;
    let lod = errors_vs_reference(&exp.problem, &exp.reference, &sol)?;
    let (p1, _) = exp.classical(tol)?;
    let (p1_energy, p1_l2, _) = relative_errors(&exp.problem, &exp.reference, &p1)?;
    let t_solve = start.elapsed().as_secs_f64();
    let row = LadderRow {
        h: 1.0 / coarse_m as f64,
        k,
        n_dof: exp.clement.coarse_count(),
        lod,
        p1_energy,
        p1_l2,
        lod_iterations: sol.report.iterations,
        reference_iterations: exp.reference_report.iterations,
        timings: Timings {
            reference: exp.reference_seconds,
            correctors: t_correctors,
            solve: t_solve,
        },
    };
    Ok((row, exp, sol))
}

/// Least-squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(LodError::Config(format!(
            "a line fit needs at least two paired points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(LodError::Config("non-finite value in line fit".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LodError::Config("line fit with identical abscissae".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

/// Fit of `ln y` against `ln x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayStudy {
    pub vertex: usize,
    pub saturation: usize,
    pub points: Vec<DecayPoint>,
    /// Fit of `ln error` against `k` over the points with nonzero error.
    pub fit: Option<LineFit>,
}

impl DecayStudy {
    /// Error reduction per added layer, `exp(slope)`.
    pub fn contraction(&self) -> Option<f64> {
        self.fit.map(|f| f.slope.exp())
    }
}

/// Decay profile at `vertex` up to `k_max` (saturation when `None`), with
/// the log-linear fit restricted to `k <= fit_max` when given.
pub fn decay_study(
    exp: &Experiment,
    vertex: usize,
    k_max: Option<usize>,
    fit_max: Option<usize>,
) -> Result<DecayStudy> {
    let saturation = exp.mesh.saturation_layers(vertex)?;
    let points = decay_profile(
        &exp.problem,
        &exp.clement,
        &exp.mesh,
        vertex,
        k_max.unwrap_or(saturation),
    )?;
    let (ks, logs): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.error > 0.0 && fit_max.is_none_or(|m| p.k <= m))
        .map(|p| (p.k as f64, p.error.ln()))
        .unzip();
    let fit = if ks.len() >= 2 {
        Some(linear_fit(&ks, &logs)?)
    } else {
        None
    };
    Ok(DecayStudy {
        vertex,
        saturation,
        points,
        fit,
    })
}
