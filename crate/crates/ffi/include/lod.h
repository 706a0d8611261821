#ifndef LOD_H
#define LOD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LodStatus {
  LOD_STATUS_OK = 0,
  LOD_STATUS_NULL_POINTER = 1,
  LOD_STATUS_INVALID_ARGUMENT = 2,
  LOD_STATUS_INVALID_MESH = 3,
  LOD_STATUS_INVALID_COEFFICIENT = 4,
  LOD_STATUS_IO = 5,
  LOD_STATUS_SOLVER_FAILURE = 6,
  LOD_STATUS_BUFFER_TOO_SMALL = 7,
  LOD_STATUS_PANIC = 8,
} LodStatus;

/*
 Cell-wise constant diffusion coefficient.
 */
typedef struct LodCoefficient LodCoefficient;

/*
 Nested mesh hierarchy.
 */
typedef struct LodMesh LodMesh;

/*
 Result of [`lod_solve`].
 */
typedef struct LodSolution LodSolution;

/*
 Errors of a multiscale solution relative to the fine reference solution.
 */
typedef struct LodErrors {
  double rel_energy;
  double rel_l2;
  double rel_l2_interp;
  /*
   Nonzero when the reference vanished and the errors are absolute.
   */
  uint8_t degenerate;
} LodErrors;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer
 stays valid until the next call into this library on the same thread.
 */
const char *lod_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *lod_version(void);

/*
 # Safety
 `out` must be a valid pointer to writable storage for one pointer.
 */
enum LodStatus lod_mesh_new(size_t coarse_m, size_t refinements, struct LodMesh **out);

/*
 # Safety
 `mesh` must be NULL or a handle from [`lod_mesh_new`] not yet freed.
 */
void lod_mesh_free(struct LodMesh *mesh);

/*
 Vertex and triangle counts of one level.

 # Safety
 `mesh` must be a live handle; `vertices` and `triangles` must be NULL or
 writable.
 */
enum LodStatus lod_mesh_level_counts(const struct LodMesh *mesh,
                                     size_t level,
                                     size_t *vertices,
                                     size_t *triangles);

/*
 # Safety
 `mesh` must be a live handle.
 */
size_t lod_mesh_level_count(const struct LodMesh *mesh);

/*
 # Safety
 `out` must be writable.
 */
enum LodStatus lod_coefficient_constant(double value, struct LodCoefficient **out);

/*
 I.i.d. uniform cell values on `[lo, hi)` on a `raster_m x raster_m` grid.

 # Safety
 `out` must be writable.
 */
enum LodStatus lod_coefficient_random(size_t raster_m,
                                      double lo,
                                      double hi,
                                      uint64_t seed,
                                      struct LodCoefficient **out);

/*
 Load a text raster (`rows cols` header, row 0 at the bottom).

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LodStatus lod_coefficient_load(const char *path, struct LodCoefficient **out);

/*
 Writes `beta / alpha` to `contrast`.

 # Safety
 `coefficient` must be a live handle and `contrast` writable.
 */
enum LodStatus lod_coefficient_contrast(const struct LodCoefficient *coefficient, double *contrast);

/*
 # Safety
 `coefficient` must be NULL or a live handle.
 */
void lod_coefficient_free(struct LodCoefficient *coefficient);

/*
 Solve `-div(A grad u) = g` (constant `g`) with the localized multiscale
 method on the coarse level of `mesh`, using `k` layers (`0` selects
 `ceil(2 ln(1/H))`). Errors are measured against the fine solution.

 # Safety
 `mesh` and `coefficient` must be live handles; `out` must be writable.
 */
enum LodStatus lod_solve(const struct LodMesh *mesh,
                         const struct LodCoefficient *coefficient,
                         double g,
                         size_t k,
                         double tol,
                         struct LodSolution **out);

/*
 # Safety
 `solution` must be NULL or a live handle.
 */
void lod_solution_free(struct LodSolution *solution);

/*
 Number of coarse coefficients (interior coarse vertices).

 # Safety
 `solution` must be a live handle.
 */
size_t lod_solution_coarse_len(const struct LodSolution *solution);

/*
 Number of fine nodal values (all fine vertices, boundary included).

 # Safety
 `solution` must be a live handle.
 */
size_t lod_solution_fine_len(const struct LodSolution *solution);

/*
 # Safety
 `solution` must be a live handle.
 */
size_t lod_solution_layers(const struct LodSolution *solution);

/*
 Copy the coarse coefficients into `buf` (capacity `len`).

 # Safety
 `solution` must be a live handle and `buf` valid for `len` writes.
 */
enum LodStatus lod_solution_copy_coarse(const struct LodSolution *solution,
                                        double *buf,
                                        size_t len);

/*
 Copy the fine nodal values (lexicographic vertex order) into `buf`.

 # Safety
 `solution` must be a live handle and `buf` valid for `len` writes.
 */
enum LodStatus lod_solution_copy_fine(const struct LodSolution *solution, double *buf, size_t len);

/*
 # Safety
 `solution` must be a live handle and `out` writable.
 */
enum LodStatus lod_solution_errors(const struct LodSolution *solution, struct LodErrors *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOD_H */
