#ifndef EGM_H
#define EGM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EgmMethod {
  EGM_METHOD_PLUGIN = 0,
  EGM_METHOD_GRAPHICAL = 1,
} EgmMethod;

typedef enum EgmStatus {
  EGM_STATUS_OK = 0,
  EGM_STATUS_NULL_POINTER = 1,
  EGM_STATUS_INVALID_ARGUMENT = 2,
  EGM_STATUS_DIMENSION = 3,
  EGM_STATUS_NOT_POSITIVE_DEFINITE = 4,
  EGM_STATUS_INVALID_GRAPH = 5,
  EGM_STATUS_NOT_NESTED = 6,
  EGM_STATUS_SAMPLE_SIZE = 7,
  EGM_STATUS_DEGENERATE_DATA = 8,
  EGM_STATUS_NO_CONVERGENCE = 9,
  EGM_STATUS_NUMERICAL = 10,
  EGM_STATUS_PANIC = 11,
} EgmStatus;

/**
 * Result of a location/scatter fit.
 */
typedef struct EgmFit EgmFit;

/**
 * Undirected graph on vertices `0..p`.
 */
typedef struct EgmGraph EgmGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *egm_last_error_message(void);

/**
 * Graph on `p` vertices without edges.
 */
struct EgmGraph *egm_graph_new(size_t p);

/**
 * Chordless cycle `0 - 1 - ... - (p-1) - 0`; requires `p >= 3`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum EgmStatus egm_graph_cycle(size_t p, struct EgmGraph **out);

/**
 * Parses the text graph format (1-based vertex labels).
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EgmStatus egm_graph_parse(const char *text, struct EgmGraph **out);

/**
 * Adds the edge between 0-based vertices `i` and `j`.
 *
 * # Safety
 * `g` must be a live graph handle.
 */
enum EgmStatus egm_graph_add_edge(struct EgmGraph *g, size_t i, size_t j);

/**
 * # Safety
 * `g` must be a live graph handle or NULL.
 */
size_t egm_graph_dim(const struct EgmGraph *g);

/**
 * # Safety
 * `g` must be a live graph handle or NULL.
 */
size_t egm_graph_num_edges(const struct EgmGraph *g);

/**
 * # Safety
 * `g` must be NULL or a handle not yet freed.
 */
void egm_graph_free(struct EgmGraph *g);

/**
 * Computes `h_G(a)` for the `p x p` matrix `a`, writing it to `out`.
 * `tol <= 0` selects the default tolerance.
 *
 * # Safety
 * `a` and `out` must hold `p * p` doubles; `iterations` may be NULL.
 */
enum EgmStatus egm_h_g(const double *a,
                       size_t p,
                       const struct EgmGraph *g,
                       double tol,
                       double *out,
                       size_t *iterations);

/**
 * Partial correlation matrix `-K_D^{-1/2} K K_D^{-1/2}` of the
 * concentration matrix `k`.
 *
 * # Safety
 * `k` and `out` must hold `p * p` doubles.
 */
enum EgmStatus egm_partial_correlation(const double *k, size_t p, double *out);

/**
 * Asymptotic relative efficiency of the cycle-constrained partial
 * correlation estimate in the chordless `p`-cycle with partial
 * correlation `c`.
 *
 * # Safety
 * `are` must be a valid pointer.
 */
enum EgmStatus egm_are_chordless_cycle(size_t p, double c, double *are);

/**
 * Deviance of `g0` within `g1` at the scatter estimate `s` from `n`
 * observations, divided by `sigma1`.
 *
 * # Safety
 * `s` must hold `p * p` doubles; `statistic` and `p_value` must be valid.
 */
enum EgmStatus egm_deviance(const double *s,
                            size_t p,
                            const struct EgmGraph *g0,
                            const struct EgmGraph *g1,
                            size_t n,
                            double sigma1,
                            double *statistic,
                            double *p_value);

/**
 * Fits location and graph-constrained scatter to the row-major `n x p`
 * data `x` with the estimator named by `estimator` (`gaussian`, `t:<nu>`,
 * `huber:<k>`). `tol <= 0` selects the default tolerance.
 *
 * # Safety
 * `x` must hold `n * p` doubles, `estimator` must be NUL-terminated and
 * `out` a valid pointer.
 */
enum EgmStatus egm_fit(const double *x,
                       size_t n,
                       size_t p,
                       const struct EgmGraph *g,
                       const char *estimator,
                       enum EgmMethod method,
                       double tol,
                       struct EgmFit **out);

/**
 * # Safety
 * `fit` must be a live fit handle or NULL.
 */
size_t egm_fit_dim(const struct EgmFit *fit);

/**
 * # Safety
 * `fit` must be a live fit handle; `out` must hold `p` doubles.
 */
enum EgmStatus egm_fit_location(const struct EgmFit *fit, double *out);

/**
 * # Safety
 * `fit` must be a live fit handle; `out` must hold `p * p` doubles.
 */
enum EgmStatus egm_fit_scatter(const struct EgmFit *fit, double *out);

/**
 * # Safety
 * `fit` must be a live fit handle or NULL.
 */
size_t egm_fit_iterations(const struct EgmFit *fit);

/**
 * # Safety
 * `fit` must be a live fit handle or NULL.
 */
double egm_fit_residual(const struct EgmFit *fit);

/**
 * # Safety
 * `fit` must be NULL or a handle not yet freed.
 */
void egm_fit_free(struct EgmFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EGM_H */
