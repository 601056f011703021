#ifndef CONSTELLATION_MAP_H
#define CONSTELLATION_MAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CmStatus {
  CM_STATUS_OK = 0,
  CM_STATUS_INVALID_ARGUMENT = 1,
  CM_STATUS_NULL_POINTER = 2,
  CM_STATUS_DEGENERATE_INPUT = 3,
  CM_STATUS_EMPTY_INPUT = 4,
  CM_STATUS_SHAPE_MISMATCH = 5,
  CM_STATUS_SCHEMA = 6,
  CM_STATUS_IO = 7,
  CM_STATUS_PANIC = 99,
} CmStatus;

typedef enum CmMappingKind {
  CM_MAPPING_KIND_QAM = 0,
  CM_MAPPING_KIND_MRC = 1,
  CM_MAPPING_KIND_MIC = 2,
} CmMappingKind;

/**
 * Opaque mapping handle.
 */
typedef struct CmMapping CmMapping;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cm_last_error_message(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void cm_string_free(char *s);

/**
 * Creates a mapping with the default initialization: uniform levels (QAM),
 * midpoint boundaries (MRC) or a QAM grid of points (MIC). `order` is the
 * number of constellation points and must be a perfect square.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum CmStatus cm_mapping_new(enum CmMappingKind kind,
                             size_t order,
                             double v_min,
                             double v_max,
                             double delta,
                             struct CmMapping **out);

/**
 * Parses mapping parameters from a JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` as for [`cm_mapping_new`].
 */
enum CmStatus cm_mapping_from_json(const char *json, struct CmMapping **out);

/**
 * Loads mapping parameters from a JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` as for [`cm_mapping_new`].
 */
enum CmStatus cm_mapping_load(const char *path, struct CmMapping **out);

/**
 * Saves mapping parameters to a JSON file.
 *
 * # Safety
 * `mapping` must be a live handle and `path` a NUL-terminated string.
 */
enum CmStatus cm_mapping_save(const struct CmMapping *mapping, const char *path);

/**
 * Serializes the mapping to a newly allocated JSON string (free with
 * [`cm_string_free`]).
 *
 * # Safety
 * `mapping` must be a live handle and `out` writable.
 */
enum CmStatus cm_mapping_to_json(const struct CmMapping *mapping, char **out);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `mapping` must come from this library and not have been freed already.
 */
void cm_mapping_free(struct CmMapping *mapping);

/**
 * Number of finite constellation points (0 for a NULL handle).
 *
 * # Safety
 * `mapping` must be a live handle or NULL.
 */
size_t cm_mapping_num_points(const struct CmMapping *mapping);

/**
 * Copies the finite constellation as interleaved `re, im` pairs into `out`,
 * which must hold `2 * cm_mapping_num_points` doubles.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum CmStatus cm_mapping_points(const struct CmMapping *mapping, double *out, size_t len);

/**
 * Number of learnable parameters (boundaries for MRC, `2N` coordinates
 * for MIC, 0 for QAM).
 *
 * # Safety
 * `mapping` must be a live handle or NULL.
 */
size_t cm_mapping_num_params(const struct CmMapping *mapping);

/**
 * Copies the learnable parameters into `out` (`len` must equal
 * [`cm_mapping_num_params`]).
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum CmStatus cm_mapping_get_params(const struct CmMapping *mapping, double *out, size_t len);

/**
 * Overwrites the learnable parameters.
 *
 * # Safety
 * `mapping` must be a live handle; `values` must point to `len` doubles.
 */
enum CmStatus cm_mapping_set_params(struct CmMapping *mapping, const double *values, size_t len);

/**
 * Maps `len` reals (pairs of `re, im`) onto the finite constellation.
 * `output` receives `len` doubles; `clusters`, when not NULL, receives
 * `len / 2` cluster indices.
 *
 * # Safety
 * Buffers must be valid for the stated lengths.
 */
enum CmStatus cm_mapping_forward(const struct CmMapping *mapping,
                                 const double *input_ptr,
                                 size_t len,
                                 double *output_ptr,
                                 size_t *clusters);

/**
 * Straight-through mapping of one point.
 *
 * Writes the hard value to `value[0..2]` and the soft surrogate to
 * `backward[0..2]` (either may be NULL). `jacobian`, when not NULL, must hold
 * `2 * (2 + cm_mapping_num_params)` doubles and receives two rows (real then
 * imaginary output), each `[d/d p_re, d/d p_im, d/d param_0, ...]`.
 *
 * # Safety
 * Buffers must be valid for the stated lengths.
 */
enum CmStatus cm_mapping_map_point(const struct CmMapping *mapping,
                                   double re,
                                   double im,
                                   double *value,
                                   double *backward,
                                   double *jacobian,
                                   size_t jacobian_len);

/**
 * Trains the mapping in place (stage 1 then stage 2) from JSON-encoded
 * training and source configurations; either may be NULL for the defaults
 * (default source: bimodal encoder-like mixture). The trained decoder is
 * written to `gain` and `bias` when they are not NULL.
 *
 * # Safety
 * `mapping` must be a live handle; strings must be NUL-terminated.
 */
enum CmStatus cm_mapping_train(struct CmMapping *mapping,
                               const char *train_json,
                               const char *source_json,
                               double *gain,
                               double *bias);

/**
 * Normalizes `block` in place to mean square `power`; the applied
 * multiplier is written to `scale` when not NULL.
 *
 * # Safety
 * `block` must point to `len` writable doubles.
 */
enum CmStatus cm_power_normalize(double *block, size_t len, double power, double *scale);

/**
 * Per-real-dimension noise variance for an SNR in dB (`INFINITY` gives 0).
 *
 * # Safety
 * `out` must be writable.
 */
enum CmStatus cm_snr_to_noise_variance(double snr_db, double power, double *out);

/**
 * Adds AWGN in place using the deterministic stream `(seed, counter)`.
 *
 * # Safety
 * `block` must point to `len` writable doubles.
 */
enum CmStatus cm_awgn_transmit(double *block,
                               size_t len,
                               double snr_db,
                               double power,
                               uint64_t seed,
                               uint64_t counter);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONSTELLATION_MAP_H */
