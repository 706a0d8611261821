//! C ABI over the `lod` crate.
//!
//! Objects are opaque handles created by `lod_*_new`/`lod_coefficient_*`
//! constructors and released with the matching `_free`. Every fallible call
//! returns an [`LodStatus`]; on failure a message is available from
//! [`lod_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lod::corrector::compute_all;
use lod::fem::{assemble, solve_galerkin, LoadSpec};
use lod::interpolation::build_clement;
use lod::{build_basis, errors_vs_reference, solve_lod, CoefficientField, LayerRule, LodError, TriMesh};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LodStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidMesh = 3,
    InvalidCoefficient = 4,
    Io = 5,
    SolverFailure = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

impl From<&LodError> for LodStatus {
    fn from(e: &LodError) -> Self {
        match e {
            LodError::InvalidMesh(_) | LodError::LevelOutOfRange { .. } | LodError::NotInterior(_) => {
                Self::InvalidMesh
            }
            LodError::Ellipticity(_)
            | LodError::InvalidCoefficient(_)
            | LodError::Misaligned { .. }
            | LodError::Parse { .. } => Self::InvalidCoefficient,
            LodError::Io(_) | LodError::Cache(_) => Self::Io,
            LodError::Config(_) | LodError::Dimension(_) => Self::InvalidArgument,
            LodError::NotConverged { .. }
            | LodError::Singular(_)
            | LodError::RankDeficient(_)
            | LodError::EmptyPatch(_)
            | LodError::CorrectorCheck { .. }
            | LodError::CorrectorFailures { .. } => Self::SolverFailure,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: LodStatus, msg: impl Into<String>) -> LodStatus {
    set_error(msg);
    status
}

fn from_lod(e: LodError) -> LodStatus {
    let status = LodStatus::from(&e);
    fail(status, e.to_string())
}

/// Run `f`, converting panics to [`LodStatus::Panic`].
fn guard(f: impl FnOnce() -> LodStatus) -> LodStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(LodStatus::Panic, "internal panic"),
    }
}

fn put<T>(out: *mut *mut T, value: T) -> LodStatus {
    // SAFETY: callers checked `out` for null
    unsafe { *out = Box::into_raw(Box::new(value)) };
    LodStatus::Ok
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn lod_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lod_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Nested mesh hierarchy.
pub struct LodMesh(TriMesh);

/// Cell-wise constant diffusion coefficient.
pub struct LodCoefficient(CoefficientField);

/// Result of [`lod_solve`].
pub struct LodSolution {
    coarse: Vec<f64>,
    fine: Vec<f64>,
    k: usize,
    errors: LodErrors,
}

/// Errors of a multiscale solution relative to the fine reference solution.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LodErrors {
    pub rel_energy: f64,
    pub rel_l2: f64,
    pub rel_l2_interp: f64,
    /// Nonzero when the reference vanished and the errors are absolute.
    pub degenerate: u8,
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn lod_mesh_new(coarse_m: usize, refinements: usize, out: *mut *mut LodMesh) -> LodStatus {
    guard(|| {
        if out.is_null() {
            return fail(LodStatus::NullPointer, "out is NULL");
        }
        match lod::build_hierarchy(coarse_m, refinements) {
            Ok(m) => put(out, LodMesh(m)),
            Err(e) => from_lod(e),
        }
    })
}

/// # Safety
/// `mesh` must be NULL or a handle from [`lod_mesh_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lod_mesh_free(mesh: *mut LodMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Vertex and triangle counts of one level.
///
/// # Safety
/// `mesh` must be a live handle; `vertices` and `triangles` must be NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lod_mesh_level_counts(
    mesh: *const LodMesh,
    level: usize,
    vertices: *mut usize,
    triangles: *mut usize,
) -> LodStatus {
    guard(|| {
        let Some(mesh) = mesh.as_ref() else {
            return fail(LodStatus::NullPointer, "mesh is NULL");
        };
        match mesh.0.level(level) {
            Ok(lv) => {
                if !vertices.is_null() {
                    *vertices = lv.vertex_count();
                }
                if !triangles.is_null() {
                    *triangles = lv.triangle_count();
                }
                LodStatus::Ok
            }
            Err(e) => from_lod(e),
        }
    })
}

/// # Safety
/// `mesh` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lod_mesh_level_count(mesh: *const LodMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.level_count())
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lod_coefficient_constant(value: f64, out: *mut *mut LodCoefficient) -> LodStatus {
    guard(|| {
        if out.is_null() {
            return fail(LodStatus::NullPointer, "out is NULL");
        }
        match CoefficientField::constant(value) {
            Ok(c) => put(out, LodCoefficient(c)),
            Err(e) => from_lod(e),
        }
    })
}

/// I.i.d. uniform cell values on `[lo, hi)` on a `raster_m x raster_m` grid.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lod_coefficient_random(
    raster_m: usize,
    lo: f64,
    hi: f64,
    seed: u64,
    out: *mut *mut LodCoefficient,
) -> LodStatus {
    guard(|| {
        if out.is_null() {
            return fail(LodStatus::NullPointer, "out is NULL");
        }
        match CoefficientField::random_cellwise(raster_m, lo, hi, seed) {
            Ok(c) => put(out, LodCoefficient(c)),
            Err(e) => from_lod(e),
        }
    })
}

/// Load a text raster (`rows cols` header, row 0 at the bottom).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lod_coefficient_load(path: *const c_char, out: *mut *mut LodCoefficient) -> LodStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(LodStatus::NullPointer, "path or out is NULL");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(LodStatus::InvalidArgument, "path is not UTF-8");
        };
        match CoefficientField::load_raster(path) {
            Ok(c) => put(out, LodCoefficient(c)),
            Err(e) => from_lod(e),
        }
    })
}

/// Writes `beta / alpha` to `contrast`.
///
/// # Safety
/// `coefficient` must be a live handle and `contrast` writable.
#[no_mangle]
pub unsafe extern "C" fn lod_coefficient_contrast(coefficient: *const LodCoefficient, contrast: *mut f64) -> LodStatus {
    guard(|| match (coefficient.as_ref(), contrast.is_null()) {
        (Some(c), false) => {
            *contrast = c.0.contrast();
            LodStatus::Ok
        }
        _ => fail(LodStatus::NullPointer, "coefficient or contrast is NULL"),
    })
}

/// # Safety
/// `coefficient` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lod_coefficient_free(coefficient: *mut LodCoefficient) {
    if !coefficient.is_null() {
        drop(Box::from_raw(coefficient));
    }
}

/// Solve `-div(A grad u) = g` (constant `g`) with the localized multiscale
/// method on the coarse level of `mesh`, using `k` layers (`0` selects
/// `ceil(2 ln(1/H))`). Errors are measured against the fine solution.
///
/// # Safety
/// `mesh` and `coefficient` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lod_solve(
    mesh: *const LodMesh,
    coefficient: *const LodCoefficient,
    g: f64,
    k: usize,
    tol: f64,
    out: *mut *mut LodSolution,
) -> LodStatus {
    guard(|| {
        let (Some(mesh), Some(coefficient)) = (mesh.as_ref(), coefficient.as_ref()) else {
            return fail(LodStatus::NullPointer, "mesh or coefficient is NULL");
        };
        if out.is_null() {
            return fail(LodStatus::NullPointer, "out is NULL");
        }
        if !(tol > 0.0 && tol < 1.0) {
            return fail(LodStatus::InvalidArgument, format!("tol must lie in (0, 1), got {tol}"));
        }
        match solve(&mesh.0, &coefficient.0, g, k, tol) {
            Ok(s) => put(out, s),
            Err(e) => from_lod(e),
        }
    })
}

fn solve(mesh: &TriMesh, field: &CoefficientField, g: f64, k: usize, tol: f64) -> lod::Result<LodSolution> {
    let k = if k == 0 {
        LayerRule::default().layers(mesh.coarse().m())
    } else {
        k
    };
    let problem = assemble(mesh, mesh.fine_level(), field, LoadSpec::Constant(g))?;
    let (reference, _) = solve_galerkin(&problem, tol)?;
    let clement = build_clement(mesh)?;
    let correctors = compute_all(&problem, &clement, mesh, k)?;
    let basis = build_basis(mesh, &problem, &correctors)?;
    let sol = solve_lod(mesh, &problem, &clement, &basis, k, tol)?;
    let e = errors_vs_reference(&problem, &reference, &sol)?;
    Ok(LodSolution {
        coarse: sol.coarse,
        fine: sol.fine.values,
        k,
        errors: LodErrors {
            rel_energy: e.rel_energy,
            rel_l2: e.rel_l2,
            rel_l2_interp: e.rel_l2_interp,
            degenerate: u8::from(e.degenerate),
        },
    })
}

/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lod_solution_free(solution: *mut LodSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Number of coarse coefficients (interior coarse vertices).
///
/// # Safety
/// `solution` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lod_solution_coarse_len(solution: *const LodSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.coarse.len())
}

/// Number of fine nodal values (all fine vertices, boundary included).
///
/// # Safety
/// `solution` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lod_solution_fine_len(solution: *const LodSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.fine.len())
}

/// # Safety
/// `solution` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lod_solution_layers(solution: *const LodSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.k)
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> LodStatus {
    if buf.is_null() {
        return fail(LodStatus::NullPointer, "buffer is NULL");
    }
    if len < src.len() {
        return fail(
            LodStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    LodStatus::Ok
}

/// Copy the coarse coefficients into `buf` (capacity `len`).
///
/// # Safety
/// `solution` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lod_solution_copy_coarse(solution: *const LodSolution, buf: *mut f64, len: usize) -> LodStatus {
    guard(|| match solution.as_ref() {
        Some(s) => copy_out(&s.coarse, buf, len),
        None => fail(LodStatus::NullPointer, "solution is NULL"),
    })
}

/// Copy the fine nodal values (lexicographic vertex order) into `buf`.
///
/// # Safety
/// `solution` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lod_solution_copy_fine(solution: *const LodSolution, buf: *mut f64, len: usize) -> LodStatus {
    guard(|| match solution.as_ref() {
        Some(s) => copy_out(&s.fine, buf, len),
        None => fail(LodStatus::NullPointer, "solution is NULL"),
    })
}

/// # Safety
/// `solution` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lod_solution_errors(solution: *const LodSolution, out: *mut LodErrors) -> LodStatus {
    guard(|| match (solution.as_ref(), out.is_null()) {
        (Some(s), false) => {
            *out = s.errors;
            LodStatus::Ok
        }
        _ => fail(LodStatus::NullPointer, "solution or out is NULL"),
    })
}
