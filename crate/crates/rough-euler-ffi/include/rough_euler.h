/* C interface to the rough-euler library. */

#ifndef ROUGH_EULER_H
#define ROUGH_EULER_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes mirroring the CLI exit classes.
 */
typedef enum RgeStatus {
  RGE_STATUS_OK = 0,
  /**
   * Invalid configuration or argument.
   */
  RGE_STATUS_INVALID_INPUT = 1,
  /**
   * I/O or file-format failure.
   */
  RGE_STATUS_IO = 2,
  /**
   * An experiment criterion failed.
   */
  RGE_STATUS_CRITERIA_FAILED = 3,
  /**
   * Numerical failure: blow-up or unsplittable step.
   */
  RGE_STATUS_NUMERICAL = 4,
  /**
   * A required pointer argument was null.
   */
  RGE_STATUS_NULL_POINTER = 5,
  /**
   * A string argument was not valid UTF-8.
   */
  RGE_STATUS_INVALID_UTF8 = 6,
  /**
   * Index out of range.
   */
  RGE_STATUS_INDEX_OUT_OF_RANGE = 7,
  /**
   * Internal panic; consult the last error message.
   */
  RGE_STATUS_PANIC = 8,
} RgeStatus;

/**
 * Opaque piecewise-linear driver path.
 */
typedef struct RgePath RgePath;

/**
 * Opaque canonical level-2 lift on a time grid.
 */
typedef struct RgeRoughPath RgeRoughPath;

/**
 * Summary of a completed simulation.
 */
typedef struct RgeSimSummary {
  uintptr_t accepted_steps;
  uintptr_t rejected_steps;
  double final_time;
  double final_l2_vorticity;
  double final_sup_vorticity;
  double bkm_integral;
  double harmonic_constant[2];
  /**
   * 1 when the run stopped at the blow-up ceiling.
   */
  int32_t blew_up;
} RgeSimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message for the calling thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *rge_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *rge_version(void);

/**
 * Samples a dyadic piecewise-linear Brownian path (see the library's
 * seeding scheme; identical seeds refine consistently across levels).
 *
 * # Safety
 * `out` must point to writable storage for one pointer.
 */
enum RgeStatus rge_path_brownian(uint64_t seed,
                                 uint32_t level,
                                 double t_final,
                                 uintptr_t dim,
                                 struct RgePath **out);

/**
 * Reads a path from CSV with header `t,z_1,...,z_K`.
 *
 * # Safety
 * `csv_path` must be a valid C string; `out` as in [`rge_path_brownian`].
 */
enum RgeStatus rge_path_from_csv(const char *csv_path, struct RgePath **out);

/**
 * Number of breakpoints of the path (segments + 1).
 *
 * # Safety
 * `path` must be a live handle from this library.
 */
uintptr_t rge_path_points(const struct RgePath *path);

/**
 * Driver dimension K.
 *
 * # Safety
 * `path` must be a live handle from this library.
 */
uintptr_t rge_path_dim(const struct RgePath *path);

/**
 * # Safety
 * `path` must come from this library and not be freed twice.
 */
void rge_path_free(struct RgePath *path);

/**
 * Canonically lifts a path to its level-2 rough path on the same grid.
 *
 * # Safety
 * `path` must be a live handle; `out` must be writable.
 */
enum RgeStatus rge_path_lift(const struct RgePath *path, struct RgeRoughPath **out);

/**
 * Number of grid intervals of the lift.
 *
 * # Safety
 * `lift` must be a live handle from this library.
 */
uintptr_t rge_roughpath_intervals(const struct RgeRoughPath *lift);

/**
 * Driver dimension K of the lift.
 *
 * # Safety
 * `lift` must be a live handle from this library.
 */
uintptr_t rge_roughpath_dim(const struct RgeRoughPath *lift);

/**
 * Increment over grid span [i, j]: writes K entries of Z to `z_out`
 * and K×K row-major entries of the second level to `zz_out`
 * (`zz[l*K+k] = ∫ Z^l dz^k`).
 *
 * # Safety
 * `z_out` must hold K doubles and `zz_out` K·K doubles.
 */
enum RgeStatus rge_roughpath_increment(const struct RgeRoughPath *lift,
                                       uintptr_t i,
                                       uintptr_t j,
                                       double *z_out,
                                       double *zz_out);

/**
 * Largest Chen defect entry over all grid triples of the lift.
 *
 * # Safety
 * `lift` must be a live handle from this library.
 */
double rge_roughpath_max_chen_defect(const struct RgeRoughPath *lift);

/**
 * Largest geometricity defect entry over all grid pairs of the lift.
 *
 * # Safety
 * `lift` must be a live handle from this library.
 */
double rge_roughpath_max_geometricity_defect(const struct RgeRoughPath *lift);

/**
 * # Safety
 * `lift` must come from this library and not be freed twice.
 */
void rge_roughpath_free(struct RgeRoughPath *lift);

/**
 * Parses a JSON solver configuration, runs it, and writes the standard
 * output layout (diagnostics.csv, snapshots/, report.json) into
 * `out_dir`. `summary` may be null.
 *
 * # Safety
 * `config_json` and `out_dir` must be valid C strings.
 */
enum RgeStatus rge_simulate_json(const char *config_json,
                                 const char *out_dir,
                                 struct RgeSimSummary *summary);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ROUGH_EULER_H */
