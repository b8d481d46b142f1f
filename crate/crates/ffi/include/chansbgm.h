#ifndef CHANSBGM_H
#define CHANSBGM_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible function.
 */
typedef enum ChansbgmStatus {
  CHANSBGM_STATUS_OK = 0,
  CHANSBGM_STATUS_INVALID_ARGUMENT = 1,
  CHANSBGM_STATUS_DOMAIN_MISMATCH = 2,
  CHANSBGM_STATUS_CAPACITY = 3,
  CHANSBGM_STATUS_DEGENERATE_INPUT = 4,
  CHANSBGM_STATUS_NUMERIC = 5,
  CHANSBGM_STATUS_ITERATION = 6,
  CHANSBGM_STATUS_FORMAT = 7,
  CHANSBGM_STATUS_IO = 8,
  CHANSBGM_STATUS_NULL_POINTER = 9,
  CHANSBGM_STATUS_PANIC = 10,
} ChansbgmStatus;

/**
 * Opaque batch of generated parameters (and optionally channels).
 */
typedef struct ChansbgmBatch ChansbgmBatch;

/**
 * Opaque dictionary handle.
 */
typedef struct ChansbgmDictionary ChansbgmDictionary;

/**
 * Opaque model handle.
 */
typedef struct ChansbgmModel ChansbgmModel;

/**
 * EM options; obtain defaults from [`chansbgm_fit_options_default`].
 */
typedef struct ChansbgmFitOptions {
  size_t max_iters;
  double rel_tol;
  uint64_t seed;
  /**
   * 0 for per-gridpoint variances, 1 for the Kronecker form.
   */
  int32_t kronecker;
  size_t kronecker_sweeps;
  double floor;
} ChansbgmFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL, or
 * 0 if there is none.
 */
size_t chansbgm_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *chansbgm_version(void);

enum ChansbgmStatus chansbgm_dictionary_simo(size_t antennas,
                                             size_t grid_size,
                                             struct ChansbgmDictionary **out);

enum ChansbgmStatus chansbgm_dictionary_ofdm(size_t subcarriers,
                                             size_t symbols,
                                             double subcarrier_spacing,
                                             double symbol_duration,
                                             size_t doppler_grid,
                                             size_t delay_grid,
                                             double max_doppler,
                                             double max_delay,
                                             struct ChansbgmDictionary **out);

void chansbgm_dictionary_free(struct ChansbgmDictionary *dict);

enum ChansbgmStatus chansbgm_dictionary_shape(const struct ChansbgmDictionary *dict,
                                              size_t *rows,
                                              size_t *cols);

/**
 * Copies the dictionary (row-major, interleaved) into `out`, which must hold
 * `2·rows·cols` doubles.
 */
enum ChansbgmStatus chansbgm_dictionary_copy(const struct ChansbgmDictionary *dict,
                                             double *out,
                                             size_t len);

struct ChansbgmFitOptions chansbgm_fit_options_default(void);

/**
 * Builds a model with per-gridpoint variances. `gammas` is `k × s`
 * row-major; `floor` below zero selects the default.
 */
enum ChansbgmStatus chansbgm_model_new(size_t k,
                                       size_t s,
                                       const double *weights,
                                       const double *gammas,
                                       double floor,
                                       struct ChansbgmModel **out);

/**
 * Loads a model written by `chansbgm fit` from directory `dir`.
 */
enum ChansbgmStatus chansbgm_model_load(const char *dir, struct ChansbgmModel **out);

void chansbgm_model_free(struct ChansbgmModel *model);

size_t chansbgm_model_components(const struct ChansbgmModel *model);

size_t chansbgm_model_sparse_dim(const struct ChansbgmModel *model);

/**
 * Copies the weights (`k` doubles) and the expanded variances (`k × s`
 * row-major) into the given buffers. Either buffer may be null.
 */
enum ChansbgmStatus chansbgm_model_params(const struct ChansbgmModel *model,
                                          double *weights,
                                          double *gammas);

/**
 * Fits a `k`-component model by EM.
 *
 * `observations` holds `n` samples of length `m` (interleaved, row-major),
 * `noise_vars` one variance per sample. `indices` lists the `m` observed
 * channel entries; pass null when every entry is observed (`m` = rows of
 * the dictionary).
 */
enum ChansbgmStatus chansbgm_fit(const struct ChansbgmDictionary *dict,
                                 const double *observations,
                                 const double *noise_vars,
                                 size_t n,
                                 size_t m,
                                 const size_t *indices,
                                 size_t k,
                                 const struct ChansbgmFitOptions *options,
                                 struct ChansbgmModel **out);

/**
 * Posterior mean of `s` given one observation `y` of length `m` under
 * prior variances `gamma`. `indices` as in [`chansbgm_fit`]. `mean` receives
 * `2·cols` doubles.
 */
enum ChansbgmStatus chansbgm_posterior_mean(const struct ChansbgmDictionary *dict,
                                            const double *gamma,
                                            const double *y,
                                            size_t m,
                                            const size_t *indices,
                                            double noise_var,
                                            double *mean);

/**
 * Draws `n` parameter vectors. `p_max` = 0 keeps every entry; otherwise only
 * the `p_max` strongest entries of each vector survive.
 */
enum ChansbgmStatus chansbgm_generate(const struct ChansbgmModel *model,
                                      size_t n,
                                      uint64_t seed,
                                      size_t p_max,
                                      struct ChansbgmBatch **out);

/**
 * Maps the batch parameters to channels with `dict`.
 */
enum ChansbgmStatus chansbgm_batch_render(struct ChansbgmBatch *batch,
                                          const struct ChansbgmDictionary *dict);

void chansbgm_batch_free(struct ChansbgmBatch *batch);

size_t chansbgm_batch_len(const struct ChansbgmBatch *batch);

/**
 * Length of one parameter vector, or 0 for an empty batch.
 */
size_t chansbgm_batch_param_dim(const struct ChansbgmBatch *batch);

/**
 * Length of one rendered channel, or 0 if the batch is not rendered.
 */
size_t chansbgm_batch_channel_dim(const struct ChansbgmBatch *batch);

/**
 * Copies the parameters (`n × dim`, interleaved) into `out` of `len` doubles.
 */
enum ChansbgmStatus chansbgm_batch_params(const struct ChansbgmBatch *batch,
                                          double *out,
                                          size_t len);

/**
 * Copies the rendered channels into `out` of `len` doubles.
 */
enum ChansbgmStatus chansbgm_batch_channels(const struct ChansbgmBatch *batch,
                                            double *out,
                                            size_t len);

/**
 * Copies the component labels (`n` entries) into `out`.
 */
enum ChansbgmStatus chansbgm_batch_labels(const struct ChansbgmBatch *batch,
                                          size_t *out,
                                          size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHANSBGM_H */
