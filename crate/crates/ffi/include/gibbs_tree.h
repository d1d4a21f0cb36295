#ifndef GIBBS_TREE_H
#define GIBBS_TREE_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GtStatus {
  GT_STATUS_OK = 0,
  GT_STATUS_CONFIG = 1,
  GT_STATUS_CONTRACT = 2,
  GT_STATUS_INVALID_KERNEL = 3,
  GT_STATUS_PRECONDITION = 4,
  GT_STATUS_NUMERIC = 5,
  GT_STATUS_NO_CONVERGENCE = 6,
  GT_STATUS_DIVERGENCE = 7,
  GT_STATUS_RESOURCE = 8,
  GT_STATUS_IO = 9,
  GT_STATUS_NULL_POINTER = 10,
  GT_STATUS_PANIC = 11,
} GtStatus;

typedef struct GtField GtField;

typedef struct GtFieldList GtFieldList;

typedef struct GtKernel GtKernel;

typedef struct GtVertexField GtVertexField;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Owned by the library.
 */
const char *gt_last_error(void);

/**
 * `rule` is one of `gauss-split`, `composite-simpson`, `trapezoid`.
 *
 * # Safety
 * `name` and `rule` are nul-terminated strings; `out` is writable.
 */
enum GtStatus gt_kernel_new_preset(const char *name,
                                   size_t n_nodes,
                                   const char *rule,
                                   struct GtKernel **out_kernel);

/**
 * `K(t,u) = exp(J·beta·xi(t,u))` with `xi` an expression in `t` and `u`.
 *
 * # Safety
 * `xi` and `rule` are nul-terminated strings; `out` is writable.
 */
enum GtStatus gt_kernel_new_expression(const char *xi,
                                       double coupling,
                                       double beta,
                                       size_t n_nodes,
                                       const char *rule,
                                       struct GtKernel **out_kernel);

/**
 * # Safety
 * `kernel` is null or came from a `gt_kernel_new_*` call and is not used afterwards.
 */
void gt_kernel_free(struct GtKernel *kernel);

/**
 * Number of quadrature nodes; 0 for a null kernel.
 *
 * # Safety
 * `kernel` is null or valid.
 */
size_t gt_kernel_n_nodes(const struct GtKernel *kernel);

/**
 * Copies nodes and weights into buffers of length `gt_kernel_n_nodes`.
 *
 * # Safety
 * Both buffers hold at least `len` doubles.
 */
enum GtStatus gt_kernel_grid(const struct GtKernel *kernel,
                             double *nodes,
                             double *weights,
                             size_t len);

/**
 * # Safety
 * `kernel` is valid; output pointers are writable.
 */
enum GtStatus gt_kernel_zero_mean(const struct GtKernel *kernel,
                                  double tol,
                                  bool *out_holds,
                                  double *out_max_dev);

/**
 * # Safety
 * `values` holds `len` doubles; `out_field` is writable.
 */
enum GtStatus gt_field_new(const double *values,
                           size_t len,
                           double value_at_zero,
                           struct GtField **out_field);

/**
 * # Safety
 * `field` is null or owned by the caller and not used afterwards.
 */
void gt_field_free(struct GtField *field);

/**
 * # Safety
 * `field` is null or valid.
 */
size_t gt_field_len(const struct GtField *field);

/**
 * Copies node values into `buf` (length `gt_field_len`) and the t = 0 value into `out_at_zero`.
 *
 * # Safety
 * `buf` holds `len` doubles; `out_at_zero` is writable.
 */
enum GtStatus gt_field_values(const struct GtField *field,
                              double *buf,
                              size_t len,
                              double *out_at_zero);

/**
 * `k·A(h)`.
 *
 * # Safety
 * Handles are valid; `out_field` is writable.
 */
enum GtStatus gt_apply_ka(const struct GtKernel *kernel,
                          size_t k,
                          const struct GtField *h,
                          struct GtField **out_field);

/**
 * Solves `kA(h) = target` for `h` with `h(0) = 0`.
 *
 * # Safety
 * Handles are valid; `out_field` is writable.
 */
enum GtStatus gt_invert_ka(const struct GtKernel *kernel,
                           size_t k,
                           const struct GtField *target,
                           double tol,
                           size_t max_iter,
                           struct GtField **out_field);

/**
 * Distinct translation-invariant fixed points of kA from the standard
 * initial set, sorted by sup norm.
 *
 * # Safety
 * `kernel` is valid; `out_list` is writable.
 */
enum GtStatus gt_find_ti(const struct GtKernel *kernel,
                         size_t k,
                         double tol,
                         size_t max_iter,
                         struct GtFieldList **out_list);

/**
 * # Safety
 * `list` is null or valid.
 */
size_t gt_field_list_len(const struct GtFieldList *list);

/**
 * A copy of entry `index`, owned by the caller.
 *
 * # Safety
 * `list` is valid; `out_field` is writable.
 */
enum GtStatus gt_field_list_get(const struct GtFieldList *list,
                                size_t index,
                                struct GtField **out_field);

/**
 * # Safety
 * `list` is null or owned by the caller and not used afterwards.
 */
void gt_field_list_free(struct GtFieldList *list);

/**
 * Empirical sup-norm and pointwise Lipschitz ratios of A over random pairs.
 *
 * # Safety
 * `kernel` is valid; output pointers are writable.
 */
enum GtStatus gt_estimate_contraction(const struct GtKernel *kernel,
                                      size_t n_samples,
                                      double amplitude,
                                      uint64_t seed,
                                      double *out_alpha,
                                      double *out_pointwise);

/**
 * The same field at every vertex (root scaled by (k+1)/k on the full tree).
 *
 * # Safety
 * `field` is valid; `out_vf` is writable.
 */
enum GtStatus gt_vertex_field_ti(const struct GtField *field,
                                 size_t k,
                                 size_t depth,
                                 bool full_tree,
                                 struct GtVertexField **out_vf);

/**
 * # Safety
 * `vf` is null or owned by the caller and not used afterwards.
 */
void gt_vertex_field_free(struct GtVertexField *vf);

/**
 * Number of vertices; 0 for null.
 *
 * # Safety
 * `vf` is null or valid.
 */
size_t gt_vertex_field_len(const struct GtVertexField *vf);

/**
 * Copy of the field at `addr` (digits joined by `/`, empty for the root).
 *
 * # Safety
 * `vf` is valid; `addr` is a nul-terminated string; `out_field` is writable.
 */
enum GtStatus gt_vertex_field_get(const struct GtVertexField *vf,
                                  const char *addr,
                                  struct GtField **out_field);

/**
 * Largest sup-norm defect of the equation over non-leaf vertices.
 *
 * # Safety
 * Handles are valid; `out_residual` is writable.
 */
enum GtStatus gt_residual(const struct GtKernel *kernel,
                          const struct GtVertexField *vf,
                          double *out_residual);

/**
 * Lifts a solution on the order-k0 tree to the order-`k` tree.
 *
 * # Safety
 * Handles are valid; `out_vf` is writable.
 */
enum GtStatus gt_art_lift(const struct GtKernel *kernel,
                          const struct GtVertexField *source,
                          size_t k,
                          size_t depth,
                          double tol,
                          struct GtVertexField **out_vf);

/**
 * Half-tree field glued from fixed points `h` (left of the path of `r`) and
 * `eta` (right), seeded with their midpoint at depth `depth`.
 *
 * # Safety
 * Handles are valid; `out_vf` is writable.
 */
enum GtStatus gt_bg_field(const struct GtKernel *kernel,
                          size_t k,
                          const struct GtField *h,
                          const struct GtField *eta,
                          double r,
                          size_t depth,
                          double tol,
                          struct GtVertexField **out_vf);

/**
 * Zachary levels as a half-tree field. If a level cannot be produced the
 * field covers the levels obtained so far and `out_complete` is false.
 *
 * # Safety
 * Handles are valid; output pointers are writable.
 */
enum GtStatus gt_zachary(const struct GtKernel *kernel,
                         size_t k,
                         const struct GtField *zeta0,
                         size_t n_levels,
                         double tol,
                         size_t max_iter,
                         struct GtVertexField **out_vf,
                         bool *out_complete);

/**
 * `ln Z_n` of the finite-volume measure.
 *
 * # Safety
 * Handles are valid; `out_log_z` is writable.
 */
enum GtStatus gt_log_partition(const struct GtKernel *kernel,
                               const struct GtVertexField *vf,
                               double *out_log_z);

/**
 * Spin density at `addr`; the root when `addr` is empty.
 *
 * # Safety
 * Handles are valid; `addr` is a nul-terminated string; `out_field` is writable.
 */
enum GtStatus gt_marginal(const struct GtKernel *kernel,
                          const struct GtVertexField *vf,
                          const char *addr,
                          struct GtField **out_field);

/**
 * # Safety
 * Handles are valid; output pointers are writable.
 */
enum GtStatus gt_check_compatibility(const struct GtKernel *kernel,
                                     const struct GtVertexField *vf,
                                     size_t n_samples,
                                     uint64_t seed,
                                     double tol,
                                     double *out_max_rel_err,
                                     bool *out_pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GIBBS_TREE_H */
