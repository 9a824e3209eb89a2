#ifndef SHARPSCOPE_H
#define SHARPSCOPE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by fallible calls.
typedef enum SsStatus {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_INVALID_ARGUMENT = 2,
  SS_STATUS_CONFIG = 3,
  SS_STATUS_IO = 4,
  SS_STATUS_FORMAT = 5,
  SS_STATUS_DIVERGENCE = 6,
  SS_STATUS_NUMERICAL = 7,
  SS_STATUS_PANIC = 8,
  SS_STATUS_OUT_OF_RANGE = 9,
} SsStatus;

// Opaque training set.
typedef struct SsDataset SsDataset;

// Opaque SGD trajectory.
typedef struct SsTrajectory SsTrajectory;

// Settings for one SGD run on a ReLU network with `eta = c / lambda_0`.
typedef struct SsTrainOptions {
  size_t depth;
  size_t width;
  double c;
  size_t steps;
  size_t batch_size;
  uint64_t seed;
  // Probe-set size for sharpness.
  size_t probe_m;
  size_t probe_iters;
  // Measure sharpness at every step; otherwise only at step 0.
  bool sharpness_every_step;
  double divergence_k;
} SsTrainOptions;

// One recorded step. `sharpness` is NaN when it was not measured.
typedef struct SsStepRecord {
  size_t t;
  double loss;
  double accuracy;
  double sharpness;
} SsStepRecord;

// Grid `c = 2^x` for `x` from `x_min` to `x_max` in steps of `x_step`,
// scanned for `t1` steps from one initialization.
typedef struct SsScanOptions {
  size_t depth;
  size_t width;
  uint64_t seed;
  size_t batch_size;
  size_t probe_m;
  size_t probe_iters;
  size_t t1;
  double divergence_k;
  double x_min;
  double x_max;
  double x_step;
  // Interpolation points for `c_barrier`; 0 skips it.
  size_t barrier_points;
} SsScanOptions;

// Critical learning-rate constants; NaN marks a constant not found.
typedef struct SsCriticalConstants {
  double c_loss;
  double c_sharp;
  double c_max;
  double c_barrier;
  double lambda0;
  double loss0;
} SsCriticalConstants;

// Initialization averages for the `uv` model of width `w`.
typedef struct SsUvMoments {
  double m2;
  double m4;
  double m42;
} SsUvMoments;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Bytes in the last error message of this thread, excluding the NUL.
size_t ss_last_error_length(void);

// Copies the last error message into `buf` as a NUL-terminated string,
// truncating to `len - 1` bytes. Returns the number of bytes written,
// excluding the NUL.
//
// # Safety
// `buf` must point to at least `len` writable bytes.
size_t ss_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *ss_version(void);

// Balanced Gaussian classes with globally standardized inputs.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum SsStatus ss_dataset_synthetic(size_t n,
                                   size_t n_in,
                                   size_t classes,
                                   uint64_t seed,
                                   struct SsDataset **out);

// Loads IDX image and label files. `limit` keeps the first `limit`
// examples; 0 keeps all of them.
//
// # Safety
// The paths must be NUL-terminated strings and `out` a valid handle slot.
enum SsStatus ss_dataset_idx(const char *images_path,
                             const char *labels_path,
                             size_t classes,
                             size_t limit,
                             struct SsDataset **out);

// Number of examples, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle.
size_t ss_dataset_len(const struct SsDataset *ds);

// Input dimension, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle.
size_t ss_dataset_n_in(const struct SsDataset *ds);

// # Safety
// `ds` must be null or a handle not yet freed.
void ss_dataset_free(struct SsDataset *ds);

// Defaults: 4x32, c = 1, 100 steps, batch 256, probe 2048 with 20
// iterations, sharpness only at step 0, K = 1e5.
struct SsTrainOptions ss_train_options_default(void);

// Trains from the seeded initialization and returns the trajectory.
// A run that crosses `divergence_k` stops early and is still returned.
//
// # Safety
// `ds` and `opts` must be live pointers and `out` a valid handle slot.
enum SsStatus ss_train(const struct SsDataset *ds,
                       const struct SsTrainOptions *opts,
                       struct SsTrajectory **out);

// Number of recorded steps, or 0 for a null handle.
//
// # Safety
// `tr` must be null or a live handle.
size_t ss_trajectory_len(const struct SsTrajectory *tr);

// # Safety
// `tr` must be a live handle and `out` a valid pointer.
enum SsStatus ss_trajectory_get(const struct SsTrajectory *tr, size_t i, struct SsStepRecord *out);

// Initial sharpness `lambda_0`, or NaN for a null handle.
//
// # Safety
// `tr` must be null or a live handle.
double ss_trajectory_lambda0(const struct SsTrajectory *tr);

// Learning rate used, or NaN for a null handle.
//
// # Safety
// `tr` must be null or a live handle.
double ss_trajectory_eta(const struct SsTrajectory *tr);

// First step at which the loss crossed K, or -1 when the run stayed finite.
//
// # Safety
// `tr` must be null or a live handle.
int64_t ss_trajectory_diverged_at(const struct SsTrajectory *tr);

// # Safety
// `tr` must be null or a handle not yet freed.
void ss_trajectory_free(struct SsTrajectory *tr);

// Defaults: 4x32, batch 256, probe 2048 with 20 iterations, t1 = 10,
// K = 1e5, x in [-1, 6] step 0.1, 50 barrier points.
struct SsScanOptions ss_scan_options_default(void);

// Scans the grid and reports the critical constants of one seed.
//
// # Safety
// `ds` and `opts` must be live pointers and `out` a valid pointer.
enum SsStatus ss_scan_critical_constants(const struct SsDataset *ds,
                                         const struct SsScanOptions *opts,
                                         struct SsCriticalConstants *out);

// Closed-form initialization moments. Returns NaNs for `w == 0`.
struct SsUvMoments ss_uv_moments(size_t w);

// Expected `L_1 / L_0` after one step with `eta = k / Tr H_0`. NaN for `w == 0`.
double ss_uv_first_step_loss_ratio(double k, size_t w);

// Smallest `k` at which the expected loss grows after one step. NaN for `w == 0`.
double ss_uv_k_loss(size_t w);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHARPSCOPE_H */
