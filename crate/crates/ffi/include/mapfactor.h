#ifndef MAPFACTOR_H
#define MAPFACTOR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MfStatus {
  MF_STATUS_OK = 0,
  MF_STATUS_NULL_POINTER = 1,
  MF_STATUS_INVALID_ARGUMENT = 2,
  MF_STATUS_SHAPE_MISMATCH = 3,
  MF_STATUS_DEGENERATE = 4,
  MF_STATUS_INSUFFICIENT_COMPONENT = 5,
  MF_STATUS_NUMERIC_OVERFLOW = 6,
  MF_STATUS_RETRY_EXHAUSTED = 7,
  MF_STATUS_IO = 8,
  MF_STATUS_FORMAT = 9,
  MF_STATUS_BUFFER_TOO_SMALL = 10,
  MF_STATUS_PANIC = 11,
} MfStatus;

/*
 Opaque ground-truth scene handle.
 */
typedef struct MfScene MfScene;

/*
 Loss terms and the weighted total, in report order.
 */
typedef struct MfLossReport {
  double pointmap;
  double rays;
  double rot;
  double translation;
  double depth;
  double lpm;
  double scale;
  double normal;
  double gm;
  double mask;
  double total;
} MfLossReport;

/*
 Benchmark metrics; undefined values (too few views) are NaN.
 */
typedef struct MfMetricReport {
  double depth_rel;
  double depth_tau;
  double points_rel;
  double points_tau;
  double ate_rmse;
  double pose_auc5;
  double pose_rra_deg;
  double pose_rta_deg;
  double ray_err_deg;
  double scale_rel;
} MfMetricReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the most recent failure on this thread, or NULL after a
 successful call. The pointer stays valid until the next library call on
 the same thread.
 */
const char *mf_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *mf_version(void);

/*
 Generates an analytic scene with unit metric scale and a ground plane.

 # Safety
 `out` must be a valid pointer; on success it receives a handle owned by
 the caller.
 */
enum MfStatus mf_scene_synth(uint64_t seed,
                             size_t n_views,
                             size_t width,
                             size_t height,
                             size_t n_spheres,
                             struct MfScene **out);

/*
 # Safety
 `dir` must be a NUL-terminated path; `out` a valid pointer.
 */
enum MfStatus mf_scene_load(const char *dir, struct MfScene **out);

/*
 # Safety
 `scene` must come from this library; `dir` must be NUL-terminated.
 */
enum MfStatus mf_scene_save(const struct MfScene *scene, const char *dir);

/*
 Releases a scene. NULL is accepted.

 # Safety
 `scene` must be NULL or a handle from this library not yet freed.
 */
void mf_scene_free(struct MfScene *scene);

/*
 # Safety
 Pointers must be valid.
 */
enum MfStatus mf_scene_view_count(const struct MfScene *scene, size_t *out);

/*
 # Safety
 Pointers must be valid.
 */
enum MfStatus mf_scene_view_size(const struct MfScene *scene,
                                 size_t view,
                                 size_t *width,
                                 size_t *height);

/*
 Metric world points of one view, row-major `x, y, z` per pixel
 (`3·width·height` doubles); invalid pixels are zero. `validity`, if not
 NULL, receives `width·height` flags.

 # Safety
 Buffers must hold at least the stated number of elements.
 */
enum MfStatus mf_scene_world_points(const struct MfScene *scene,
                                    size_t view,
                                    double *xyz,
                                    size_t xyz_len,
                                    uint8_t *validity,
                                    size_t validity_len);

/*
 Row-major `n × n` covisibility fractions.

 # Safety
 `out` must hold `out_len` doubles.
 */
enum MfStatus mf_covisibility(const struct MfScene *scene,
                              double rel_depth_tol,
                              double *out,
                              size_t out_len);

/*
 Samples `n_views` connected views from a row-major `n × n` covisibility
 matrix.

 # Safety
 `fraction` must hold `n·n` doubles and `out` at least `out_len` entries.
 */
enum MfStatus mf_random_walk_sample(const double *fraction,
                                    size_t n,
                                    double threshold,
                                    size_t n_views,
                                    uint64_t seed,
                                    size_t *out,
                                    size_t out_len);

/*
 # Safety
 `out` must be valid.
 */
enum MfStatus mf_robust_kernel(double x, double alpha, double c, double *out);

/*
 # Safety
 `out` must be valid.
 */
enum MfStatus mf_robust_kernel_grad(double x, double alpha, double c, double *out);

/*
 Total training loss of `pred` (used with unit confidence and its hard
 mask) against `gt`, with default weights.

 # Safety
 Pointers must be valid.
 */
enum MfStatus mf_total_loss(const struct MfScene *pred,
                            const struct MfScene *gt,
                            bool synthetic,
                            struct MfLossReport *out);

/*
 # Safety
 Pointers must be valid.
 */
enum MfStatus mf_evaluate(const struct MfScene *pred,
                          const struct MfScene *gt,
                          bool align_points,
                          struct MfMetricReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAPFACTOR_H */
