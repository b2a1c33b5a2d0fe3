/* SPDX-License-Identifier: Apache-2.0 */

#ifndef FRIEDRICHS_H
#define FRIEDRICHS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every function.
typedef enum FrStatus {
  FR_STATUS_OK = 0,
  FR_STATUS_INVALID_INPUT = 1,
  FR_STATUS_NULL_POINTER = 2,
  FR_STATUS_GRID_MISMATCH = 3,
  FR_STATUS_SAMPLING = 4,
  FR_STATUS_SINGULAR = 5,
  FR_STATUS_NON_CONVERGENCE = 6,
  FR_STATUS_DIVERGENCE = 7,
  FR_STATUS_INVERSION = 8,
  FR_STATUS_PRECONDITION = 9,
  FR_STATUS_OVERFLOW = 10,
  FR_STATUS_TIME_CAP = 11,
  FR_STATUS_UNKNOWN_PRESET = 12,
  FR_STATUS_PARAMETER = 13,
  FR_STATUS_CONFIG = 14,
  FR_STATUS_IO = 15,
  FR_STATUS_CSV = 16,
  FR_STATUS_BUFFER_TOO_SMALL = 17,
  FR_STATUS_PANIC = 18,
} FrStatus;

// Midpoint grid on `(a, b)`.
typedef struct FrGrid FrGrid;

// Strictly lower-triangular kernel operator.
typedef struct FrKernel FrKernel;

// Summed successive-approximation series `K` and its diagnostics.
typedef struct FrTransform FrTransform;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *fr_version(void);

// Message of the last failed call on this thread ("" after a success).
// Valid until the next call into this library from the same thread.
const char *fr_last_error(void);

// Creates a grid of `n >= 2` cells on `(a, b)`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum FrStatus fr_grid_new(size_t n, double a, double b, struct FrGrid **out);

// Releases a grid; null is ignored.
//
// # Safety
// `grid` must be null or a handle from [`fr_grid_new`] not yet freed.
void fr_grid_free(struct FrGrid *grid);

// Number of cells.
//
// # Safety
// `grid` must be a live grid handle; `out` must be writable.
enum FrStatus fr_grid_n(const struct FrGrid *grid, size_t *out);

// Copies the `n` node positions into `out`.
//
// # Safety
// `grid` must be live; `out` must hold `len` doubles.
enum FrStatus fr_grid_nodes(const struct FrGrid *grid, double *out, size_t len);

// Kernel of a catalog preset on `grid`. `keys`/`values` hold `n_params`
// parameter overrides (both may be null when `n_params` is 0).
//
// # Safety
// `grid` must be live, `name` NUL-terminated, `keys` an array of
// `n_params` NUL-terminated strings, `values` an array of `n_params`
// doubles, and `out` writable.
enum FrStatus fr_kernel_from_preset(const struct FrGrid *grid,
                                    const char *name,
                                    const char *const *keys,
                                    const double *values,
                                    size_t n_params,
                                    int cell_average,
                                    struct FrKernel **out);

// Kernel from a dense row-major `n * n` matrix (strictly lower triangular).
//
// # Safety
// `grid` must be live, `data` must hold `len` doubles, `out` writable.
enum FrStatus fr_kernel_from_matrix(const struct FrGrid *grid,
                                    const double *data,
                                    size_t len,
                                    int cell_average,
                                    struct FrKernel **out);

// Releases a kernel; null is ignored.
//
// # Safety
// `kernel` must be null or a live kernel handle.
void fr_kernel_free(struct FrKernel *kernel);

// Grid size of the kernel.
//
// # Safety
// `kernel` must be live; `out` writable.
enum FrStatus fr_kernel_n(const struct FrKernel *kernel, size_t *out);

// Copies the kernel matrix (row-major, `n * n` values) into `out`.
//
// # Safety
// `kernel` must be live; `out` must hold `len` doubles.
enum FrStatus fr_kernel_copy_matrix(const struct FrKernel *kernel, double *out, size_t len);

// `L2` operator norm.
//
// # Safety
// `kernel` must be live; `out` writable.
enum FrStatus fr_kernel_op_norm(const struct FrKernel *kernel, double *out);

// Gelfand estimate `||A^n_max||^(1/n_max)`.
//
// # Safety
// `kernel` must be live; `out` writable.
enum FrStatus fr_kernel_gelfand(const struct FrKernel *kernel, size_t n_max, double *out);

// Majorant `|[S, .]^{-1} V|` with `S` the multiplication by `phi`
// (`phi` null means `phi(x) = x`, otherwise `phi_len` node values).
//
// # Safety
// `v` must be live; `phi` null or `phi_len` doubles; `out` writable.
enum FrStatus fr_kernel_majorant(const struct FrKernel *v,
                                 const double *phi,
                                 size_t phi_len,
                                 struct FrKernel **out);

// Runs the successive approximations for `T = S + V` with `S` given by
// `phi` as in [`fr_kernel_majorant`].
//
// # Safety
// `v` must be live; `phi` null or `phi_len` doubles; `out` writable.
enum FrStatus fr_transform_new(const struct FrKernel *v,
                               const double *phi,
                               size_t phi_len,
                               double tol,
                               size_t n_cap,
                               struct FrTransform **out);

// Releases a transform; null is ignored.
//
// # Safety
// `t` must be null or a live transform handle.
void fr_transform_free(struct FrTransform *t);

// Summary numbers of a transform. Any out pointer may be null.
//
// # Safety
// `t` must be live; non-null out pointers must be writable.
enum FrStatus fr_transform_summary(const struct FrTransform *t,
                                   size_t *terms_used,
                                   double *residual,
                                   int *chain_ok,
                                   double *spr_k_estimate);

// New kernel handle holding `K`.
//
// # Safety
// `t` must be live; `out` writable.
enum FrStatus fr_transform_kernel(const struct FrTransform *t, struct FrKernel **out);

// Kernel of `M = (I + K)^{-1} - I`, cross-checked between Neumann series
// and forward substitution.
//
// # Safety
// `k` must be live; `out` writable.
enum FrStatus fr_invert_transform(const struct FrKernel *k, struct FrKernel **out);

// Runs a scenario from a TOML config. `command` is one of `analyze`,
// `transform`, `evolve`, `sweep`. On return `*out_json` holds the JSON
// report (a failure report when the status is not OK; free it with
// [`fr_string_free`]) and `*out_exit_code` the CLI exit code (0, 1 or 2).
//
// # Safety
// `config_toml` and `command` must be NUL-terminated; out pointers writable.
enum FrStatus fr_run(const char *config_toml,
                     const char *command,
                     char **out_json,
                     int *out_exit_code);

// Frees a string returned by this library; null is ignored.
//
// # Safety
// `s` must be null or a string returned by [`fr_run`] not yet freed.
void fr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRIEDRICHS_H */
