#ifndef POME_H
#define POME_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PomeStatus {
  POME_STATUS_OK = 0,
  POME_STATUS_NULL_POINTER = 1,
  POME_STATUS_INVALID_ARGUMENT = 2,
  POME_STATUS_CONFIG = 3,
  POME_STATUS_SHAPE = 4,
  POME_STATUS_NON_FINITE = 5,
  POME_STATUS_IO = 6,
  POME_STATUS_CHECKPOINT = 7,
  POME_STATUS_FINISHED = 8,
  POME_STATUS_INTERNAL = 9,
  POME_STATUS_PANIC = 10,
} PomeStatus;

/**
 * Opaque training session.
 */
typedef struct PomeTrainer PomeTrainer;

/**
 * Per-iteration statistics, mirroring one metrics row.
 */
typedef struct PomeIterationReport {
  uint64_t iteration;
  uint64_t total_steps;
  double mean_return;
  double median_return;
  double surrogate;
  double value_loss;
  double reward_loss;
  double transition_loss;
  double mean_eps;
  double eps_bar_mean;
  double mean_abs_bonus;
  double approx_kl;
  double clip_fraction;
  double alpha;
  double lr;
} PomeIterationReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pome_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes of writes.
 */
uintptr_t pome_last_error_message(char *buf, uintptr_t len);

/**
 * Creates a trainer from a TOML config (the same keys as a config file; an
 * empty string means all defaults).
 *
 * # Safety
 * `config_toml` must be a valid C string; `out` must be valid for one pointer write.
 */
enum PomeStatus pome_trainer_new(const char *config_toml, struct PomeTrainer **out);

/**
 * Releases a trainer. Null is ignored.
 *
 * # Safety
 * `trainer` must come from [`pome_trainer_new`] and not be used afterwards.
 */
void pome_trainer_free(struct PomeTrainer *trainer);

/**
 * Runs one training iteration. Returns `POME_STATUS_FINISHED` once the step budget is spent.
 *
 * # Safety
 * `trainer` must be a live handle; `report` null or valid for one write.
 */
enum PomeStatus pome_trainer_step(struct PomeTrainer *trainer, struct PomeIterationReport *report);

/**
 * 1 when the step budget is spent, 0 otherwise, -1 for a null handle.
 *
 * # Safety
 * `trainer` must be null or a live handle.
 */
int32_t pome_trainer_is_finished(const struct PomeTrainer *trainer);

/**
 * Writes the current parameters in the portable checkpoint format.
 *
 * # Safety
 * `trainer` must be a live handle; `path` a valid C string.
 */
enum PomeStatus pome_trainer_save_checkpoint(const struct PomeTrainer *trainer, const char *path);

/**
 * `out[i] = delta[i] + alpha·clip(eps[i] − eps_bar, −|delta[i]|, |delta[i]|)`.
 *
 * # Safety
 * `delta`, `eps` and `out` must each hold `len` doubles.
 */
enum PomeStatus pome_delta_batch(const double *delta,
                                 const double *eps,
                                 uintptr_t len,
                                 double eps_bar,
                                 double alpha,
                                 double *out);

/**
 * Median of `len` values (mean of the middle pair for even `len`).
 *
 * # Safety
 * `values` must hold `len` doubles; `out` must be valid for one write.
 */
enum PomeStatus pome_median(const double *values, uintptr_t len, double *out);

/**
 * Discounted λ-returns of TD errors within one segment, cut at `dones[t] != 0`.
 *
 * # Safety
 * `deltas`, `dones` and `out` must each hold `len` elements.
 */
enum PomeStatus pome_advantages_batch(const double *deltas,
                                      const uint8_t *dones,
                                      uintptr_t len,
                                      double gamma,
                                      double lambda,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POME_H */
