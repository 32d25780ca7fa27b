#ifndef MEMOGAN_H
#define MEMOGAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MgStatus {
  MG_STATUS_OK = 0,
  MG_STATUS_NULL_POINTER = 1,
  MG_STATUS_INVALID_ARGUMENT = 2,
  MG_STATUS_DIMENSION_MISMATCH = 3,
  MG_STATUS_PRECISION = 4,
  MG_STATUS_OVERFLOW = 5,
  MG_STATUS_PRECONDITION = 6,
  MG_STATUS_IO = 7,
  MG_STATUS_PARSE = 8,
  MG_STATUS_PANIC = 9,
} MgStatus;

/**
 * Memorizing generator.
 */
typedef struct MgGenerator MgGenerator;

/**
 * Sparse ReLU network.
 */
typedef struct MgNetwork MgNetwork;

/**
 * Partition of seed space into equal-mass blocks.
 */
typedef struct MgPartition MgPartition;

/**
 * Size summary of a compiled generator.
 */
typedef struct MgCompileReport {
  size_t nonzero_weights;
  size_t nonzero_biases;
  size_t predicted_bound;
  double ramp_width;
  double ambiguous_mass;
  double max_abs_weight;
} MgCompileReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len - 1` bytes) and returns the full message
 * length in bytes. Pass a null `buf` to query the length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t mg_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mg_version(void);

/**
 * # Safety
 * `out_partition` must be a valid pointer.
 */
enum MgStatus mg_partition_new(size_t k,
                               size_t d_tilde,
                               double sigma,
                               struct MgPartition **out_partition);

/**
 * # Safety
 * `partition` must be null or a handle from `mg_partition_new`, freed once.
 */
void mg_partition_free(struct MgPartition *partition);

/**
 * Number of blocks `k^d_tilde`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum MgStatus mg_partition_m(const struct MgPartition *partition, size_t *out_m);

/**
 * Writes the `k - 1` interior thresholds.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum MgStatus mg_partition_thresholds(const struct MgPartition *partition, double *buf, size_t len);

/**
 * 1-based block index of a seed.
 *
 * # Safety
 * `z` must point to `z_len` doubles.
 */
enum MgStatus mg_partition_block_index(const struct MgPartition *partition,
                                       const double *z,
                                       size_t z_len,
                                       size_t *out_index);

/**
 * Extracts the code `z` (length `d_tilde`) from an image `x` (length `d`).
 *
 * # Safety
 * Buffers must hold the stated lengths.
 */
enum MgStatus mg_encode(size_t d,
                        size_t d_tilde,
                        double sigma,
                        const double *x,
                        size_t x_len,
                        double *out_z,
                        size_t z_len);

/**
 * Writes `x_tilde` with the code `z` spliced in.
 *
 * # Safety
 * Buffers must hold the stated lengths.
 */
enum MgStatus mg_splice(size_t d,
                        size_t d_tilde,
                        double sigma,
                        const double *x_tilde,
                        const double *z,
                        double *out_x);

/**
 * The encoder as a one-layer network with `d_tilde` unit weights.
 *
 * # Safety
 * `out_network` must be a valid pointer.
 */
enum MgStatus mg_encoder_network(size_t d,
                                 size_t d_tilde,
                                 double sigma,
                                 struct MgNetwork **out_network);

/**
 * Memorizes `k^d_tilde` synthetic images drawn from the default clean-image
 * model with the given seed.
 *
 * # Safety
 * `out_generator` must be a valid pointer.
 */
enum MgStatus mg_generator_build(size_t d,
                                 size_t d_tilde,
                                 double sigma,
                                 size_t k,
                                 uint64_t seed,
                                 struct MgGenerator **out_generator);

/**
 * Loads a generator directory written by `mg_generator_save` or the CLI.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out_generator` a valid pointer.
 */
enum MgStatus mg_generator_load(const char *dir, struct MgGenerator **out_generator);

/**
 * # Safety
 * `dir` must be a NUL-terminated string.
 */
enum MgStatus mg_generator_save(const struct MgGenerator *generator, const char *dir);

/**
 * # Safety
 * `generator` must be null or a live handle, freed once.
 */
void mg_generator_free(struct MgGenerator *generator);

/**
 * Support size `m`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum MgStatus mg_generator_m(const struct MgGenerator *generator, size_t *out_m);

/**
 * `G(z)` into `out_x`.
 *
 * # Safety
 * Buffers must hold the stated lengths.
 */
enum MgStatus mg_generator_generate(const struct MgGenerator *generator,
                                    const double *z,
                                    size_t z_len,
                                    double *out_x,
                                    size_t x_len);

/**
 * Compiles a generator into a ReLU network whose output disagrees with the
 * generator on at most a `delta` fraction of seeds. `out_report` may be null.
 *
 * # Safety
 * `out_network` must be valid; `out_report` null or valid.
 */
enum MgStatus mg_compile(const struct MgGenerator *generator,
                         double delta,
                         struct MgNetwork **out_network,
                         struct MgCompileReport *out_report);

/**
 * # Safety
 * `network` must be null or a live handle, freed once.
 */
void mg_network_free(struct MgNetwork *network);

/**
 * # Safety
 * Pointers must be valid.
 */
enum MgStatus mg_network_dims(const struct MgNetwork *network,
                              size_t *out_input_dim,
                              size_t *out_output_dim);

/**
 * # Safety
 * Pointers must be valid.
 */
enum MgStatus mg_network_nonzero_weights(const struct MgNetwork *network, size_t *out_count);

/**
 * Evaluates the network on one input.
 *
 * # Safety
 * Buffers must hold the stated lengths.
 */
enum MgStatus mg_network_forward(const struct MgNetwork *network,
                                 const double *input,
                                 size_t input_len,
                                 double *output,
                                 size_t output_len);

/**
 * Serializes the network to JSON; release the string with `mg_string_free`.
 *
 * # Safety
 * `out_json` must be a valid pointer.
 */
enum MgStatus mg_network_to_json(const struct MgNetwork *network, char **out_json);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out_network` a valid pointer.
 */
enum MgStatus mg_network_from_json(const char *json, struct MgNetwork **out_network);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void mg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEMOGAN_H */
