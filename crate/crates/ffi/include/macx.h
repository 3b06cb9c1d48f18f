#ifndef MACX_H
#define MACX_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Values of the `method` argument of [`macx_exponent`].
 */
typedef enum MacxMethod {
  MACX_METHOD_HAROUTUNIAN = 0,
  MACX_METHOD_SPHERE_PACKING = 1,
  /**
   * Exhaustive lattice search of the sphere-packing exponent; `resolution` sets the lattice.
   */
  MACX_METHOD_GRID_ORACLE = 2,
} MacxMethod;

/**
 * Status codes shared by every entry point.
 */
typedef enum MacxStatus {
  MACX_STATUS_OK = 0,
  MACX_STATUS_NULL_POINTER = 1,
  /**
   * Malformed JSON, bad UTF-8 or an invalid probability table.
   */
  MACX_STATUS_PARSE = 2,
  MACX_STATUS_INVALID_ARGUMENT = 3,
  MACX_STATUS_SIZE_GUARD = 4,
  MACX_STATUS_INFEASIBLE = 5,
  /**
   * The rates violate a precondition of the requested check.
   */
  MACX_STATUS_PRECONDITION = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  MACX_STATUS_INTERNAL = 7,
} MacxStatus;

/**
 * Opaque channel handle.
 */
typedef struct MacxChannel MacxChannel;

/**
 * Opaque code handle, tied to the alphabets it was parsed with.
 */
typedef struct MacxCode MacxCode;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated, truncated to `len`).
 * Returns the full message length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t macx_last_error(char *buf, size_t len);

/**
 * Parses a channel from JSON (`x_size`, `y_size`, `z_size`, `w[x][y][z]`).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MacxStatus macx_channel_from_json(const char *json, struct MacxChannel **out);

/**
 * Builds a channel from `x_size * y_size * z_size` probabilities laid out as `w[(x * y_size + y) * z_size + z]`.
 *
 * # Safety
 * `w` must point to `len` readable doubles and `out` must be valid.
 */
enum MacxStatus macx_channel_new(size_t x_size,
                                 size_t y_size,
                                 size_t z_size,
                                 const double *w,
                                 size_t len,
                                 struct MacxChannel **out);

/**
 * Alphabet sizes of a channel.
 *
 * # Safety
 * `ch` must come from this library; the out pointers may be null.
 */
enum MacxStatus macx_channel_sizes(const struct MacxChannel *ch,
                                   size_t *x_size,
                                   size_t *y_size,
                                   size_t *z_size);

/**
 * # Safety
 * `ch` must be null or come from this library, and must not be used afterwards.
 */
void macx_channel_free(struct MacxChannel *ch);

/**
 * Decides whether `(r1, r2)` lies in the capacity region. `slack` may be null.
 *
 * # Safety
 * `ch` must come from this library and `inside` must be valid.
 */
enum MacxStatus macx_capacity_membership(const struct MacxChannel *ch,
                                         double r1,
                                         double r2,
                                         uint64_t seed,
                                         bool *inside,
                                         double *slack);

/**
 * Error exponent in bits at `(r1, r2)`; may be `+inf`. `resolution` is the lattice of
 * the grid oracle and is ignored by the other methods.
 *
 * # Safety
 * `ch` must come from this library and `value` must be valid.
 */
enum MacxStatus macx_exponent(const struct MacxChannel *ch,
                              uint32_t method,
                              double r1,
                              double r2,
                              uint64_t seed,
                              size_t resolution,
                              double *value);

/**
 * Parses a code (`n`, `u`, `v`) for the input alphabets of `ch`.
 *
 * # Safety
 * `ch` must come from this library, `json` must be NUL-terminated and `out` valid.
 */
enum MacxStatus macx_code_from_json(const struct MacxChannel *ch,
                                    const char *json,
                                    struct MacxCode **out);

/**
 * # Safety
 * `code` must be null or come from this library, and must not be used afterwards.
 */
void macx_code_free(struct MacxCode *code);

/**
 * Exact maximal and average error probability of a code under maximum-likelihood decoding.
 *
 * # Safety
 * Handles must come from this library; the out pointers may be null.
 */
enum MacxStatus macx_code_errors(const struct MacxChannel *ch,
                                 const struct MacxCode *code,
                                 double *max_error,
                                 double *avg_error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MACX_H */
