#ifndef SCSAR_H
#define SCSAR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScsarStatus {
  SCSAR_STATUS_OK = 0,
  SCSAR_STATUS_NULL_POINTER = 1,
  // Shapes, indices, graph or configuration rejected.
  SCSAR_STATUS_INVALID_INPUT = 2,
  // Estimation failed (rank deficiency, variance floor, parameter range).
  SCSAR_STATUS_NUMERICAL = 3,
  // Grouped data has too few farms or zero output.
  SCSAR_STATUS_DEGENERATE = 4,
  SCSAR_STATUS_IO = 5,
  // A Rust panic was caught at the boundary.
  SCSAR_STATUS_PANIC = 6,
} ScsarStatus;

typedef enum ScsarFamily {
  SCSAR_FAMILY_OLS = 0,
  SCSAR_FAMILY_SAR = 1,
  SCSAR_FAMILY_SEM = 2,
  SCSAR_FAMILY_SLX = 3,
} ScsarFamily;

// Response, design matrix and coordinates.
typedef struct ScsarDataset ScsarDataset;

// A fitted partition with its report.
typedef struct ScsarResult ScsarResult;

// Neighbourhood graph.
typedef struct ScsarWeights ScsarWeights;

// Options for [`scsar_fit`]. Obtain defaults from [`scsar_fit_options_default`].
typedef struct ScsarFitOptions {
  enum ScsarFamily family;
  size_t k;
  double phi;
  size_t max_itr;
  double eta;
  // 0 selects the default for the family.
  size_t min_cluster_size;
} ScsarFitOptions;

// Summary numbers of a fit.
typedef struct ScsarSummary {
  size_t k;
  double loglik;
  double penalized_objective;
  double aic;
  double bic;
  size_t iterations;
  size_t n_params;
} ScsarSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *scsar_last_error(void);

// Builds a symmetric binary graph on `n` units from `n_edges` index pairs
// `(from[i], to[i])`. Duplicates and both orientations are accepted.
//
// # Safety
// `from` and `to` must each point to `n_edges` readable values; `out` must
// be writable.
enum ScsarStatus scsar_weights_from_edges(size_t n,
                                          const size_t *from,
                                          const size_t *to,
                                          size_t n_edges,
                                          struct ScsarWeights **out);

// Rook-contiguity lattice, units numbered row-major.
//
// # Safety
// `out` must be writable.
enum ScsarStatus scsar_weights_lattice(size_t rows, size_t cols, struct ScsarWeights **out);

// k-nearest-neighbour graph on `n` points given as `coords[2*i], coords[2*i+1]`,
// symmetrised by union.
//
// # Safety
// `coords` must point to `2*n` readable doubles; `out` must be writable.
enum ScsarStatus scsar_weights_knn(size_t n,
                                   const double *coords,
                                   size_t k,
                                   struct ScsarWeights **out);

// # Safety
// `w` must be NULL or a handle from this library, not yet freed.
void scsar_weights_free(struct ScsarWeights *w);

// Number of units, or 0 for NULL.
//
// # Safety
// `w` must be NULL or a live handle.
size_t scsar_weights_n(const struct ScsarWeights *w);

// Number of undirected edges, or 0 for NULL.
//
// # Safety
// `w` must be NULL or a live handle.
size_t scsar_weights_n_edges(const struct ScsarWeights *w);

// Dataset of `n` units and `p` covariates. `x` is row-major `n*p`,
// `coords` holds `n` (x, y) pairs. With `add_intercept` a leading column of
// ones is added; otherwise `x` is used as the full design. Unit ids are
// `0..n` as strings.
//
// # Safety
// `y` must point to `n` doubles, `x` to `n*p`, `coords` to `2*n`; `out`
// must be writable.
enum ScsarStatus scsar_dataset_new(size_t n,
                                   size_t p,
                                   const double *y,
                                   const double *x,
                                   const double *coords,
                                   bool add_intercept,
                                   struct ScsarDataset **out);

// # Safety
// `d` must be NULL or a handle from this library, not yet freed.
void scsar_dataset_free(struct ScsarDataset *d);

struct ScsarFitOptions scsar_fit_options_default(void);

// Fits the clustered model once per seed and keeps the run with the highest
// penalized objective.
//
// # Safety
// `d` and `w` must be live handles, `seeds` must point to `n_seeds` values
// (`n_seeds >= 1`), `opts` and `out` must be valid.
enum ScsarStatus scsar_fit(const struct ScsarDataset *d,
                           const struct ScsarWeights *w,
                           const struct ScsarFitOptions *opts,
                           const uint64_t *seeds,
                           size_t n_seeds,
                           struct ScsarResult **out);

// # Safety
// `r` must be NULL or a handle from this library, not yet freed.
void scsar_result_free(struct ScsarResult *r);

// Number of units in the result, or 0 for NULL.
//
// # Safety
// `r` must be NULL or a live handle.
size_t scsar_result_n(const struct ScsarResult *r);

// Copies the 1-based cluster label of every unit into `labels[0..len]`.
//
// # Safety
// `r` must be a live handle and `labels` must point to `len` writable values.
enum ScsarStatus scsar_result_labels(const struct ScsarResult *r, size_t *labels, size_t len);

// # Safety
// `r` must be a live handle and `out` writable.
enum ScsarStatus scsar_result_summary(const struct ScsarResult *r, struct ScsarSummary *out);

// Full report as pretty-printed JSON. Release with [`scsar_string_free`].
//
// # Safety
// `r` must be a live handle and `out` writable.
enum ScsarStatus scsar_result_to_json(const struct ScsarResult *r, char **out);

// Plain-text coefficient table. Release with [`scsar_string_free`].
//
// # Safety
// `r` must be a live handle and `out` writable.
enum ScsarStatus scsar_result_to_text(const struct ScsarResult *r, char **out);

// # Safety
// `s` must be NULL or a string returned by this library, not yet freed.
void scsar_string_free(char *s);

// Grouped Gini index (0-100) of `len` size classes, ascending in output
// per farm.
//
// # Safety
// `counts` and `outputs` must point to `len` values; `out` must be writable.
enum ScsarStatus scsar_gini_grouped(const uint64_t *counts,
                                    const double *outputs,
                                    size_t len,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCSAR_H */
