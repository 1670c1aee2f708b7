#ifndef SHIFTLAB_H
#define SHIFTLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ShiftlabFormat {
  SHIFTLAB_FORMAT_JSON = 0,
  SHIFTLAB_FORMAT_CSV = 1,
} ShiftlabFormat;

/**
 * `SpaceNorm` selector for [`shiftlab_seqvec_norm`].
 */
typedef enum ShiftlabNorm {
  SHIFTLAB_NORM_L1 = 0,
  SHIFTLAB_NORM_SUP = 1,
  /**
   * Uses the `p` argument.
   */
  SHIFTLAB_NORM_LP = 2,
} ShiftlabNorm;

typedef enum ShiftlabProduct {
  SHIFTLAB_PRODUCT_CONVOLUTION = 0,
  SHIFTLAB_PRODUCT_COORDINATEWISE = 1,
} ShiftlabProduct;

/**
 * Result codes shared by every entry point.
 */
typedef enum ShiftlabStatus {
  SHIFTLAB_STATUS_OK = 0,
  /**
   * The computation ran and its report contains a failed check.
   */
  SHIFTLAB_STATUS_CHECK_FAILED = 1,
  /**
   * Null pointer, bad UTF-8 or out-of-range argument.
   */
  SHIFTLAB_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed JSON or a payload violating its schema.
   */
  SHIFTLAB_STATUS_CONFIG = 3,
  /**
   * Parameters rejected by a precondition.
   */
  SHIFTLAB_STATUS_INVALID_PARAMS = 4,
  /**
   * A brute-force or search budget was exhausted.
   */
  SHIFTLAB_STATUS_BUDGET = 5,
  /**
   * Index overflow, support collision or nonconvergent search.
   */
  SHIFTLAB_STATUS_NUMERIC = 6,
  SHIFTLAB_STATUS_IO = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  SHIFTLAB_STATUS_INTERNAL = 8,
} ShiftlabStatus;

/**
 * Covering of a parameter box.
 */
typedef struct ShiftlabCovering ShiftlabCovering;

/**
 * Finitely supported sequence.
 */
typedef struct ShiftlabSeqVec ShiftlabSeqVec;

/**
 * Built witness together with the configuration it came from.
 */
typedef struct ShiftlabWitness ShiftlabWitness;

/**
 * Scalar summary of one witness evaluation.
 */
typedef struct ShiftlabWitnessEval {
  /**
   * 1-based cell index, 0 when the power is not one of the cell powers.
   */
  uint64_t cell;
  uint64_t n_power;
  double p1;
  double p2;
  double p3;
  /**
   * NaN when neither certified nor expanded.
   */
  double premature_max;
  double total;
  bool separation_ok;
} ShiftlabWitnessEval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *shiftlab_version(void);

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *shiftlab_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void shiftlab_string_free(char *s);

/**
 * Parses `{"entries": [[k, c], ...]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ShiftlabStatus shiftlab_seqvec_from_json(const char *json, struct ShiftlabSeqVec **out);

/**
 * Builds a sequence from `len` index/value pairs; repeated indices add.
 *
 * # Safety
 * `indices` and `values` must point to `len` elements (or be null with
 * `len == 0`); `out` must be valid.
 */
enum ShiftlabStatus shiftlab_seqvec_from_pairs(const uint64_t *indices,
                                               const double *values,
                                               size_t len,
                                               struct ShiftlabSeqVec **out);

/**
 * # Safety
 * `v` must be a live handle and `out` a valid pointer.
 */
enum ShiftlabStatus shiftlab_seqvec_to_json(const struct ShiftlabSeqVec *v, char **out);

/**
 * Coefficient at index `k` (0 outside the support).
 *
 * # Safety
 * `v` must be a live handle and `out` a valid pointer.
 */
enum ShiftlabStatus shiftlab_seqvec_get(const struct ShiftlabSeqVec *v, uint64_t k, double *out);

/**
 * Number of nonzero entries.
 *
 * # Safety
 * `v` must be a live handle or null (which gives 0).
 */
size_t shiftlab_seqvec_len(const struct ShiftlabSeqVec *v);

/**
 * # Safety
 * `v` must come from this library and not be freed twice. Null is ignored.
 */
void shiftlab_seqvec_free(struct ShiftlabSeqVec *v);

/**
 * # Safety
 * `v` must be a live handle and `out` a valid pointer.
 */
enum ShiftlabStatus shiftlab_seqvec_norm(const struct ShiftlabSeqVec *v,
                                         enum ShiftlabNorm norm,
                                         double p,
                                         double *out);

/**
 * # Safety
 * `a`, `b` must be live handles and `out` a valid pointer.
 */
enum ShiftlabStatus shiftlab_seqvec_product(const struct ShiftlabSeqVec *a,
                                            const struct ShiftlabSeqVec *b,
                                            enum ShiftlabProduct kind,
                                            struct ShiftlabSeqVec **out);

/**
 * # Safety
 * `a` must be a live handle and `out` a valid pointer.
 */
enum ShiftlabStatus shiftlab_seqvec_power(const struct ShiftlabSeqVec *a,
                                          uint32_t m,
                                          enum ShiftlabProduct kind,
                                          struct ShiftlabSeqVec **out);

/**
 * `Σ_{i=l+1}^{l+n} log w_i(λ)`; `family_json` is e.g. `{"variant":"pure_power"}`.
 *
 * # Safety
 * `family_json` must be a NUL-terminated string and `out` valid.
 */
enum ShiftlabStatus shiftlab_log_cum_window(const char *family_json,
                                            double lambda,
                                            uint64_t l,
                                            uint64_t n,
                                            double *out);

/**
 * Runs a batch job. `command` is a CLI subcommand name; `seed < 0` means
 * no seed. Returns `Ok` or `CheckFailed` with the report in `out`.
 *
 * # Safety
 * `command` and `payload_json` must be NUL-terminated strings; `out` valid.
 */
enum ShiftlabStatus shiftlab_run_job(const char *command,
                                     const char *payload_json,
                                     int64_t seed,
                                     enum ShiftlabFormat format,
                                     char **out);

/**
 * Builds a covering from a `cover-build` payload.
 *
 * # Safety
 * `payload_json` must be a NUL-terminated string; `out` valid.
 */
enum ShiftlabStatus shiftlab_covering_build(const char *payload_json,
                                            struct ShiftlabCovering **out);

/**
 * Parses a covering document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` valid.
 */
enum ShiftlabStatus shiftlab_covering_from_json(const char *json, struct ShiftlabCovering **out);

/**
 * Number of cells.
 *
 * # Safety
 * `c` must be a live handle or null (which gives 0).
 */
size_t shiftlab_covering_len(const struct ShiftlabCovering *c);

/**
 * # Safety
 * `c` must be a live handle and `out` valid.
 */
enum ShiftlabStatus shiftlab_covering_to_json(const struct ShiftlabCovering *c, char **out);

/**
 * Checks properties (a)–(e) and the union; the report goes to `out`.
 *
 * # Safety
 * `c` must be a live handle, the JSON arguments NUL-terminated, `out` valid.
 */
enum ShiftlabStatus shiftlab_covering_verify(const struct ShiftlabCovering *c,
                                             const char *k_json,
                                             const char *params_json,
                                             char **out);

/**
 * # Safety
 * `c` must come from this library and not be freed twice. Null is ignored.
 */
void shiftlab_covering_free(struct ShiftlabCovering *c);

/**
 * Builds a witness from a witness configuration document.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` valid.
 */
enum ShiftlabStatus shiftlab_witness_build(const char *config_json, struct ShiftlabWitness **out);

/**
 * Number of parameter axes.
 *
 * # Safety
 * `w` must be a live handle or null (which gives 0).
 */
size_t shiftlab_witness_dim(const struct ShiftlabWitness *w);

/**
 * # Safety
 * `w` must be a live handle and `out` valid.
 */
enum ShiftlabStatus shiftlab_witness_to_json(const struct ShiftlabWitness *w, char **out);

/**
 * Evaluates at `lambda` (length `d`). With `bruteforce` the convolution
 * powers are expanded literally at the power of λ's cell.
 *
 * # Safety
 * `w` must be a live handle, `lambda` point to `d` values, `out` valid.
 */
enum ShiftlabStatus shiftlab_witness_eval(const struct ShiftlabWitness *w,
                                          const double *lambda,
                                          size_t d,
                                          bool bruteforce,
                                          struct ShiftlabWitnessEval *out);

/**
 * # Safety
 * `w` must come from this library and not be freed twice. Null is ignored.
 */
void shiftlab_witness_free(struct ShiftlabWitness *w);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHIFTLAB_H */
