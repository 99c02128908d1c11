/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef SUBSLOPE_H
#define SUBSLOPE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SubslopeStatus {
  SUBSLOPE_STATUS_OK = 0,
  SUBSLOPE_STATUS_NULL_POINTER = 1,
  SUBSLOPE_STATUS_INVALID_ARGUMENT = 2,
  SUBSLOPE_STATUS_OUTSIDE_CONE = 3,
  SUBSLOPE_STATUS_NOT_SUBSOLUTION = 4,
  SUBSLOPE_STATUS_SOLVER_FAILURE = 5,
  SUBSLOPE_STATUS_MONITOR_BREACH = 6,
  SUBSLOPE_STATUS_CONFIG = 7,
  SUBSLOPE_STATUS_IO = 8,
  SUBSLOPE_STATUS_PANIC = 9,
} SubslopeStatus;

typedef enum SubslopeDhymBranch {
  SUBSLOPE_DHYM_BRANCH_HYPERCRITICAL = 0,
  SUBSLOPE_DHYM_BRANCH_SUPERCRITICAL = 1,
  SUBSLOPE_DHYM_BRANCH_FULL = 2,
} SubslopeDhymBranch;

typedef struct SubslopeEquation SubslopeEquation;

typedef struct SubslopeField SubslopeField;

typedef struct SubslopeGeometry SubslopeGeometry;

typedef struct SubslopeOperator SubslopeOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (truncated,
// always NUL-terminated when `len > 0`). Returns the full message length
// including the terminator, or 0 when there is no message.
//
// # Safety
// `buf` must be null or writable for `len` bytes.
size_t subslope_last_error_message(char *buf, size_t len);

// Creates a torus geometry. `shape` lists grid counts for the 2n real
// coordinates x1 y1 x2 y2 …; use 1 for an inactive coordinate.
//
// # Safety
// `shape` must point to `shape_len` values; `out` must be writable.
enum SubslopeStatus subslope_geometry_new(size_t n,
                                          const size_t *shape,
                                          size_t shape_len,
                                          struct SubslopeGeometry **out);

// Number of grid points, or 0 for a null handle.
//
// # Safety
// `geom` must be null or a live geometry handle.
size_t subslope_geometry_len(const struct SubslopeGeometry *geom);

// # Safety
// `geom` must be null or a handle from [`subslope_geometry_new`].
void subslope_geometry_free(struct SubslopeGeometry *geom);

// ln(σ_k/C(n,k)) − ln(σ_l/C(n,l)) on the Gårding cone Γ_k.
//
// # Safety
// `out` must be writable.
enum SubslopeStatus subslope_operator_quotient(size_t n,
                                               size_t k,
                                               size_t l,
                                               struct SubslopeOperator **out);

// Σ arctan λ on the chosen phase branch.
//
// # Safety
// `out` must be writable.
enum SubslopeStatus subslope_operator_dhym(size_t n,
                                           enum SubslopeDhymBranch branch,
                                           struct SubslopeOperator **out);

// # Safety
// `op` must be null or a handle from an operator constructor.
void subslope_operator_free(struct SubslopeOperator *op);

// Elementary symmetric polynomial σ_k(λ).
//
// # Safety
// `lambda` must point to `n` values; `out` must be writable.
enum SubslopeStatus subslope_sigma(size_t k, const double *lambda, size_t n, double *out);

// f(λ); fails with `OUTSIDE_CONE` outside the operator's cone.
//
// # Safety
// `op` must be live, `lambda` must point to `n` values, `out` writable.
enum SubslopeStatus subslope_f_eval(const struct SubslopeOperator *op,
                                    const double *lambda,
                                    size_t n,
                                    double *out);

// ∂f/∂λᵢ written to `grad_out[0..n]`.
//
// # Safety
// `op` must be live; `lambda` and `grad_out` must hold `n` values.
enum SubslopeStatus subslope_f_grad(const struct SubslopeOperator *op,
                                    const double *lambda,
                                    size_t n,
                                    double *grad_out);

// min over i of lim f as λᵢ → +∞; writes +INFINITY when unbounded.
//
// # Safety
// `op` must be live, `lambda` must point to `n` values, `out` writable.
enum SubslopeStatus subslope_f_infinity(const struct SubslopeOperator *op,
                                        const double *lambda,
                                        size_t n,
                                        double *out);

// Builds an equation with constant diagonal background form ω =
// diag(`omega_diag`) (identity when null) and reference metric χ = I.
//
// # Safety
// `op` and `geom` must be live; `omega_diag` null or `n` values; `out`
// writable. The handles are copied, not borrowed.
enum SubslopeStatus subslope_equation_new(const struct SubslopeOperator *op,
                                          const struct SubslopeGeometry *geom,
                                          const double *omega_diag,
                                          struct SubslopeEquation **out);

// # Safety
// `eq` must be null or a handle from [`subslope_equation_new`].
void subslope_equation_free(struct SubslopeEquation *eq);

// Real field on `geom` from `len` row-major values.
//
// # Safety
// `geom` must be live, `values` must point to `len` values, `out` writable.
enum SubslopeStatus subslope_field_new(const struct SubslopeGeometry *geom,
                                       const double *values,
                                       size_t len,
                                       struct SubslopeField **out);

// # Safety
// `field` must be null or a handle from [`subslope_field_new`].
void subslope_field_free(struct SubslopeField *field);

// Evaluates F(u) = f(λ(ω_u)) into `out[0..len]`, where `len` must equal
// the number of grid points.
//
// # Safety
// `eq` and `u` must be live; `out` writable for `len` values.
enum SubslopeStatus subslope_equation_evaluate(const struct SubslopeEquation *eq,
                                               const struct SubslopeField *u,
                                               double *out,
                                               size_t len);

// Tests u_sub as a C-subsolution of F = h + `shift`: writes the verdict
// (1 or 0), the minimum margin f_∞(λ) − h − shift and its grid index.
//
// # Safety
// `eq`, `u_sub` and `h` must be live; the output pointers writable.
enum SubslopeStatus subslope_check_subsolution(const struct SubslopeEquation *eq,
                                               const struct SubslopeField *u_sub,
                                               const struct SubslopeField *h,
                                               double shift,
                                               int *is_subsolution,
                                               double *min_margin,
                                               size_t *argmin);

// Runs the continuity path for a config file and writes c₁. When
// `out_dir` is non-null, the sup-normalized φ (raw and CSV) and the
// monitor log are written there.
//
// # Safety
// `config_path` must be a NUL-terminated path, `out_dir` null or one,
// `c1` writable.
enum SubslopeStatus subslope_solve_config(const char *config_path, const char *out_dir, double *c1);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBSLOPE_H */
