#ifndef HPCALC_H
#define HPCALC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum HpStatus {
  HP_STATUS_OK = 0,
  HP_STATUS_NULL_POINTER = 1,
  HP_STATUS_INVALID_ARGUMENT = 2,
  HP_STATUS_PARSE = 3,
  HP_STATUS_DOMAIN = 4,
  HP_STATUS_UNBOUNDED = 5,
  HP_STATUS_CONVERGENCE = 6,
  HP_STATUS_NUMERICAL = 7,
  HP_STATUS_SUPPORT_VIOLATION = 8,
  HP_STATUS_UNREPRESENTABLE = 9,
  HP_STATUS_BUFFER_TOO_SMALL = 10,
  HP_STATUS_PANIC = 11,
} HpStatus;

// Factorization certificate for the convolution constant.
typedef struct HpCertificate HpCertificate;

// Bounded holomorphic function on a right half-plane.
typedef struct HpFunction HpFunction;

// Square complex matrix produced by the calculus.
typedef struct HpMatrix HpMatrix;

// Exponentially weighted measure on the half-line.
typedef struct HpMeasure HpMeasure;

// Square operator model.
typedef struct HpOperator HpOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *hp_version(void);

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes). Returns the full message length in bytes.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t hp_last_error(char *buf, size_t len);

// Diagonal operator with entries `re[i] + i im[i]`. `im` may be null.
//
// # Safety
// `re` (and `im` when non-null) must point to `n` readable doubles.
enum HpStatus hp_operator_diagonal(const double *re,
                                   const double *im,
                                   size_t n,
                                   struct HpOperator **out);

// Dense operator from `n * n` row-major entries. `im` may be null.
//
// # Safety
// `re` (and `im` when non-null) must point to `n * n` readable doubles.
enum HpStatus hp_operator_dense(const double *re,
                                const double *im,
                                size_t n,
                                struct HpOperator **out);

// Single Jordan block of size `n` with eigenvalue `re + i im`.
//
// # Safety
// `out` must be null or writable.
enum HpStatus hp_operator_jordan(double re, double im, size_t n, struct HpOperator **out);

// Operator from the line-oriented text format (`diagonal`, `dense`,
// `jordan`, `shifted` blocks).
//
// # Safety
// `src` must be a NUL-terminated string.
enum HpStatus hp_operator_parse(const char *src, struct HpOperator **out);

// Dimension of the operator, 0 for a null handle.
//
// # Safety
// `op` must be null or a live handle.
size_t hp_operator_dim(const struct HpOperator *op);

// # Safety
// `op` must be null or a handle not yet freed.
void hp_operator_free(struct HpOperator *op);

// Function from an expression such as `rpow(add(z,1),-1)`.
//
// # Safety
// `src` must be a NUL-terminated string.
enum HpStatus hp_function_parse(const char *src, struct HpFunction **out);

// Function from the built-in catalog by name.
//
// # Safety
// `name` must be a NUL-terminated string.
enum HpStatus hp_function_catalog(const char *name, struct HpFunction **out);

// Supremum of `|f|` on the half-plane `Re z > omega`.
//
// # Safety
// `f` must be a live handle and `out` writable.
enum HpStatus hp_function_sup_norm(const struct HpFunction *f, double omega, double *out);

// # Safety
// `f` must be null or a handle not yet freed.
void hp_function_free(struct HpFunction *f);

// Measure from its text form, e.g. `atom 1 0.5 0` or `exppoly 0 1,0 0,0 -1,0`.
//
// # Safety
// `src` must be a NUL-terminated string.
enum HpStatus hp_measure_parse(const char *src, struct HpMeasure **out);

// # Safety
// `mu` must be null or a handle not yet freed.
void hp_measure_free(struct HpMeasure *mu);

// `f(A)` through the best available route.
//
// # Safety
// `op` and `f` must be live handles; `out` must be writable.
enum HpStatus hp_apply_function(const struct HpOperator *op,
                                const struct HpFunction *f,
                                struct HpMatrix **out);

// `μ(A) = ∫ T(s) μ(ds)`.
//
// # Safety
// `op` and `mu` must be live handles; `out` must be writable.
enum HpStatus hp_apply_measure(const struct HpOperator *op,
                               const struct HpMeasure *mu,
                               struct HpMatrix **out);

// `f(A) (A - λ)^{-α}` with complex `λ` and `α`.
//
// # Safety
// `op` and `f` must be live handles; `out` must be writable.
enum HpStatus hp_apply_smoothed(const struct HpOperator *op,
                                const struct HpFunction *f,
                                double lambda_re,
                                double lambda_im,
                                double alpha_re,
                                double alpha_im,
                                struct HpMatrix **out);

// Dimension of the matrix, 0 for a null handle.
//
// # Safety
// `m` must be null or a live handle.
size_t hp_matrix_dim(const struct HpMatrix *m);

// Spectral norm of the matrix, NaN for a null handle.
//
// # Safety
// `m` must be null or a live handle.
double hp_matrix_norm(const struct HpMatrix *m);

// Entry `(row, col)`.
//
// # Safety
// `m` must be a live handle; `re` and `im` must be writable.
enum HpStatus hp_matrix_get(const struct HpMatrix *m,
                            size_t row,
                            size_t col,
                            double *re,
                            double *im);

// Copies all entries row-major into `re` and `im`, each of length `len`.
//
// # Safety
// `m` must be a live handle; `re` and `im` must point to `len` writable doubles.
enum HpStatus hp_matrix_copy(const struct HpMatrix *m, double *re, double *im, size_t len);

// # Safety
// `m` must be null or a handle not yet freed.
void hp_matrix_free(struct HpMatrix *m);

// Upper and lower bounds for the convolution constant at `(alpha, t, q)`.
//
// # Safety
// `upper` and `lower` must be writable.
enum HpStatus hp_eta_envelope(double alpha, double t, double q, double *upper, double *lower);

// Best certificate found for `(alpha, t, q)`.
//
// # Safety
// `out` must be writable.
enum HpStatus hp_certificate_best(double alpha, double t, double q, struct HpCertificate **out);

// Certified value `‖ψ‖_q ‖φ‖_{q'}`, NaN for a null handle.
//
// # Safety
// `c` must be null or a live handle.
double hp_certificate_value(const struct HpCertificate *c);

// Residual bound of the certificate, NaN for a null handle.
//
// # Safety
// `c` must be null or a live handle.
double hp_certificate_residual(const struct HpCertificate *c);

// # Safety
// `c` must be null or a handle not yet freed.
void hp_certificate_free(struct HpCertificate *c);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HPCALC_H */
