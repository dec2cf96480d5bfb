#ifndef FIELDTK_H
#define FIELDTK_H

/* Generated by cbindgen from src/lib.rs. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes. Zero is success.
 */
typedef enum FtkStatus {
  FTK_STATUS_OK = 0,
  FTK_STATUS_NULL_POINTER = 1,
  FTK_STATUS_INVALID_UTF8 = 2,
  /*
   Expression or model file syntax, undeclared identifiers.
   */
  FTK_STATUS_PARSE = 3,
  /*
   Missing sections, bad grids, unknown suites and similar input errors.
   */
  FTK_STATUS_CONFIG = 4,
  FTK_STATUS_DIMENSION = 5,
  FTK_STATUS_SINGULAR_HESSIAN = 6,
  FTK_STATUS_NON_CONVERGENCE = 7,
  /*
   A function was evaluated outside its domain.
   */
  FTK_STATUS_DOMAIN = 8,
  FTK_STATUS_IO = 9,
  /*
   Any other numerical failure (off-graph points, boundary nodes).
   */
  FTK_STATUS_NUMERIC = 10,
  FTK_STATUS_PANIC = 11,
} FtkStatus;

/*
 Loaded model file.
 */
typedef struct FtkModel FtkModel;

/*
 Outcome of a check, derive, integrate or verify run.
 */
typedef struct FtkReport FtkReport;

/*
 Optional run parameters. Pass NULL for the defaults.
 */
typedef struct FtkOptions {
  /*
   Node counts per time axis, or NULL to use the model's grid.
   */
  const uintptr_t *grid;
  uintptr_t grid_len;
  /*
   Tolerance override; NaN keeps each check's default.
   */
  double tol;
  /*
   RK4 substeps per grid edge; 0 means 1.
   */
  uintptr_t substeps;
} FtkOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *ftk_version(void);

/*
 Message of the last failed call on this thread, or "" after a success.
 Valid until the next library call on the same thread.
 */
const char *ftk_last_error(void);

/*
 Loads a model file. On success `*out` owns a new handle.

 # Safety
 `path` must be NUL-terminated and `out` writable.
 */
enum FtkStatus ftk_model_load(const char *path, struct FtkModel **out);

/*
 Parses model text held in memory.

 # Safety
 `text` must be NUL-terminated and `out` writable.
 */
enum FtkStatus ftk_model_parse(const char *text, struct FtkModel **out);

/*
 Releases a model. NULL is ignored.

 # Safety
 `model` must come from this library and not be used afterwards.
 */
void ftk_model_free(struct FtkModel *model);

/*
 Chart dimensions: k time axes, n fields, m algebroid rank (0 outside
 algebroid models) and the total coordinate count. Any output may be NULL.

 # Safety
 Non-NULL pointers must be writable.
 */
enum FtkStatus ftk_model_dims(const struct FtkModel *model,
                              uintptr_t *k,
                              uintptr_t *n,
                              uintptr_t *m,
                              uintptr_t *dim);

/*
 Writes the NUL-terminated name of coordinate `index` into `buf`
 (capacity `len`), truncating when it does not fit.

 # Safety
 `buf` must be writable for `len` bytes.
 */
enum FtkStatus ftk_model_coordinate_name(const struct FtkModel *model,
                                         uintptr_t index,
                                         char *buf,
                                         uintptr_t len);

/*
 Evaluates the model's Lagrangian (`which` = 0) or Hamiltonian (`which` = 1)
 at a point of the model chart, coordinates in chart order.

 # Safety
 `x` must hold `len` values and `value` be writable.
 */
enum FtkStatus ftk_model_eval(const struct FtkModel *model,
                              int32_t which,
                              const double *x,
                              uintptr_t len,
                              double *value);

/*
 Model kind as written in the file (e.g. "lagrangian"). Static string.

 # Safety
 `model` must be a live handle or NULL.
 */
const char *ftk_model_kind(const struct FtkModel *model);

/*
 Regularity, identity and structure checks.

 # Safety
 `model` must be live, `opts` NULL or valid, `out` writable.
 */
enum FtkStatus ftk_check(const struct FtkModel *model,
                         const struct FtkOptions *opts,
                         struct FtkReport **out);

/*
 Derived expressions; the listing is the report payload.

 # Safety
 As for [`ftk_check`].
 */
enum FtkStatus ftk_derive(const struct FtkModel *model,
                          const struct FtkOptions *opts,
                          struct FtkReport **out);

/*
 Integrates over the grid; the CSV table is the report payload.

 # Safety
 As for [`ftk_check`].
 */
enum FtkStatus ftk_integrate(const struct FtkModel *model,
                             const struct FtkOptions *opts,
                             struct FtkReport **out);

/*
 Runs a verification suite by name: legendre, skinner-rusk, tulczyjew,
 structure, reduction, gradients or constraints.

 # Safety
 `suite` must be NUL-terminated; otherwise as for [`ftk_check`].
 */
enum FtkStatus ftk_verify(const struct FtkModel *model,
                          const char *suite,
                          const struct FtkOptions *opts,
                          struct FtkReport **out);

/*
 Releases a report. NULL is ignored.

 # Safety
 `report` must come from this library and not be used afterwards.
 */
void ftk_report_free(struct FtkReport *report);

/*
 1 when every check passed, 0 otherwise (also for NULL).

 # Safety
 `report` must be a live handle or NULL.
 */
int32_t ftk_report_passed(const struct FtkReport *report);

/*
 Number of checks in the report.

 # Safety
 `report` must be a live handle or NULL.
 */
uintptr_t ftk_report_check_count(const struct FtkReport *report);

/*
 Defect, tolerance and pass flag of check `index`. Outputs may be NULL.

 # Safety
 Non-NULL outputs must be writable.
 */
enum FtkStatus ftk_report_check(const struct FtkReport *report,
                                uintptr_t index,
                                double *defect,
                                double *tolerance,
                                int32_t *passed);

/*
 Largest defect over all checks, 0 for an empty or NULL report.

 # Safety
 `report` must be a live handle or NULL.
 */
double ftk_report_max_defect(const struct FtkReport *report);

/*
 The report as JSON. Owned by the report.

 # Safety
 `report` must be a live handle or NULL.
 */
const char *ftk_report_json(const struct FtkReport *report);

/*
 CSV or derivation text, NULL when the command has none. Owned by the report.

 # Safety
 `report` must be a live handle or NULL.
 */
const char *ftk_report_payload(const struct FtkReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIELDTK_H */
