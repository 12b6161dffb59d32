#ifndef ROLEMODEL_H
#define ROLEMODEL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RmStatus {
  RM_STATUS_OK = 0,
  RM_STATUS_NULL_POINTER = 1,
  // Sizes that do not fit together.
  RM_STATUS_DIMENSION = 2,
  // Not a probability distribution.
  RM_STATUS_INVALID_DISTRIBUTION = 3,
  // Conditioning on a zero-probability symbol.
  RM_STATUS_UNDEFINED = 4,
  // The joint does not satisfy a theorem's hypothesis.
  RM_STATUS_PRECONDITION = 5,
  RM_STATUS_CONVERGENCE = 6,
  RM_STATUS_INVALID_CONFIG = 7,
  RM_STATUS_INVALID_STATE = 8,
  RM_STATUS_UNSUPPORTED = 9,
  RM_STATUS_IO = 10,
  // A Rust panic was caught at the boundary.
  RM_STATUS_INTERNAL = 99,
} RmStatus;

// A table `Q(x | z)`; rows for zero-probability z may be undefined.
typedef struct RmEstimator RmEstimator;

// A joint distribution `P(x, y, z)`.
typedef struct RmJoint RmJoint;

// An online trainer with its configuration and role-model posterior.
typedef struct RmTrainer RmTrainer;

typedef struct RmTheoremCheck {
  double lhs;
  double rhs;
  double gap;
  double tolerance;
  bool passed;
} RmTheoremCheck;

typedef struct RmBoundCheck {
  struct RmTheoremCheck check;
  bool equality;
  bool estimator_is_direct;
} RmBoundCheck;

typedef struct RmTrainerConfig {
  size_t window;
  uint64_t start_step;
  double step_size_initial;
  double step_size_tau;
  double clamp_epsilon;
  uint64_t n_samples;
  uint64_t seed;
} RmTrainerConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length in bytes,
// excluding the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t rm_last_error(char *buf, size_t len);

// Builds a joint from `nx * ny * nz` cells in row-major `(x, y, z)` order.
//
// # Safety
// `cells` must point to `nx * ny * nz` doubles; `out` must be writable.
enum RmStatus rm_joint_new(size_t nx,
                           size_t ny,
                           size_t nz,
                           const double *cells,
                           struct RmJoint **out_joint);

// Builds the Markov joint `prior(x) P(y | x) P(z | y)`. `xy` is `nx` rows
// of `ny` entries; `yz` is `ny` rows of `nz` entries.
//
// # Safety
// Pointers must reference arrays of the stated sizes; `out` must be writable.
enum RmStatus rm_joint_from_chain(size_t nx,
                                  size_t ny,
                                  size_t nz,
                                  const double *prior,
                                  const double *xy,
                                  const double *yz,
                                  struct RmJoint **out_joint);

// # Safety
// `joint` must be null or a handle from this library, not yet freed.
void rm_joint_free(struct RmJoint *joint);

// # Safety
// `joint` must be a live handle; the size pointers must be writable.
enum RmStatus rm_joint_dims(const struct RmJoint *joint, size_t *nx, size_t *ny, size_t *nz);

// `I(X; Z | Y)` in bits.
//
// # Safety
// `joint` must be a live handle and `value` writable.
enum RmStatus rm_joint_conditional_mutual_information(const struct RmJoint *joint, double *value);

// Builds an estimator from `nz` rows of `nx` entries.
//
// # Safety
// `values` must point to `nx * nz` doubles; `out` must be writable.
enum RmStatus rm_estimator_new(size_t nx,
                               size_t nz,
                               const double *values,
                               struct RmEstimator **out_est);

// # Safety
// `est` must be null or a handle from this library, not yet freed.
void rm_estimator_free(struct RmEstimator *est);

// # Safety
// `est` must be a live handle; the size pointers must be writable.
enum RmStatus rm_estimator_dims(const struct RmEstimator *est, size_t *nx, size_t *nz);

// `Q(x | z)`. Returns `Undefined` for a row left undefined because
// `P(z) = 0`.
//
// # Safety
// `est` must be a live handle and `value` writable.
enum RmStatus rm_estimator_get(const struct RmEstimator *est, size_t z, size_t x, double *value);

// The direct solution `P(x | z)`.
//
// # Safety
// `joint` must be a live handle and `out` writable.
enum RmStatus rm_direct_solution(const struct RmJoint *joint, struct RmEstimator **out_est);

// The closed-form role-model solution `sum_y P(y | z) P(x | y)`.
//
// # Safety
// `joint` must be a live handle and `out` writable.
enum RmStatus rm_role_model_exact(const struct RmJoint *joint, struct RmEstimator **out_est);

// Numeric minimization of the expected divergence. On `Convergence` the
// last iterate is still returned through `out`.
//
// # Safety
// `joint` must be a live handle and `out` writable.
enum RmStatus rm_role_model_numeric(const struct RmJoint *joint,
                                    double tol,
                                    size_t max_iters,
                                    struct RmEstimator **out_est);

// Expected divergence `ED(P_{X|Y} || Q)` in bits.
//
// # Safety
// Handles must be live and `value` writable.
enum RmStatus rm_expected_divergence(const struct RmJoint *joint,
                                     const struct RmEstimator *est,
                                     double *value);

// Checks `ED(P_{X|Y} || Q) = H(X|Z) - H(X|Y) + ED(P_{X|Z} || Q)` on a Markov
// joint (`Precondition` otherwise).
//
// # Safety
// Handles must be live and `result` writable.
enum RmStatus rm_check_theorem1(const struct RmJoint *joint,
                                const struct RmEstimator *est,
                                struct RmTheoremCheck *result);

// Checks `ED(P_{X|YZ} || Q) >= H(X|Z) - H(X|YZ)` on any joint.
//
// # Safety
// Handles must be live and `result` writable.
enum RmStatus rm_check_theorem2(const struct RmJoint *joint,
                                const struct RmEstimator *est,
                                struct RmBoundCheck *result);

// Checks `I(X; S_d(Z)) = I(X; Z)`.
//
// # Safety
// `joint` must be live and `result` writable.
enum RmStatus rm_sufficiency_check(const struct RmJoint *joint, struct RmTheoremCheck *result);

// Library defaults: window 100, first update at step 101, step size
// `0.05 / (1 + t / 1000)`, clamp `1e-6`, 200000 samples, seed 1.
struct RmTrainerConfig rm_trainer_config_default(void);

// Creates a trainer for `nz` observable symbols. `posterior_xy` holds the
// role model's `P(x | y)` as `ny` rows of `nx` entries.
//
// # Safety
// `posterior_xy` must point to `nx * ny` doubles, `config` must be readable
// and `out` writable.
enum RmStatus rm_trainer_new(size_t nx,
                             size_t ny,
                             size_t nz,
                             const double *posterior_xy,
                             const struct RmTrainerConfig *config,
                             struct RmTrainer **out_trainer);

// # Safety
// `trainer` must be null or a handle from this library, not yet freed.
void rm_trainer_free(struct RmTrainer *trainer);

// Feeds one observation `(y, z)`.
//
// # Safety
// `trainer` must be a live handle.
enum RmStatus rm_trainer_observe(struct RmTrainer *trainer, size_t y, size_t z);

// Number of observations fed so far.
//
// # Safety
// `trainer` must be live and `step` writable.
enum RmStatus rm_trainer_step(const struct RmTrainer *trainer, uint64_t *step);

// Moving-average divergence over the buffered observations.
//
// # Safety
// `trainer` must be live and `value` writable.
enum RmStatus rm_trainer_windowed_divergence(const struct RmTrainer *trainer, double *value);

// Copies the trainer's current estimator into a new handle.
//
// # Safety
// `trainer` must be live and `out` writable.
enum RmStatus rm_trainer_estimator(const struct RmTrainer *trainer, struct RmEstimator **out_est);

// Simulates `config.n_samples` draws from `joint` with `config.seed` and
// trains blindly on the `(y, z)` pairs, using the joint's own `P(x | y)` as
// the role model.
//
// # Safety
// `joint` must be live, `config` readable and `out` writable.
enum RmStatus rm_train_on_joint(const struct RmJoint *joint,
                                const struct RmTrainerConfig *config,
                                struct RmEstimator **out_est);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROLEMODEL_H */
