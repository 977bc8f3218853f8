#ifndef HIMAP_H
#define HIMAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes of every fallible function.
 */
typedef enum HimapStatus {
  HIMAP_STATUS_OK = 0,
  HIMAP_STATUS_NULL_POINTER = 1,
  HIMAP_STATUS_INVALID_ARGUMENT = 2,
  HIMAP_STATUS_DIMENSION = 3,
  HIMAP_STATUS_NOT_HERMITIAN = 4,
  HIMAP_STATUS_NOT_POSITIVE_DEFINITE = 5,
  HIMAP_STATUS_SINGULAR = 6,
  HIMAP_STATUS_RANK_DEFICIENT = 7,
  HIMAP_STATUS_NON_FINITE = 8,
  HIMAP_STATUS_SPEC_FILE = 9,
  HIMAP_STATUS_IO = 10,
  HIMAP_STATUS_INTERNAL = 11,
} HimapStatus;

/*
 Parsed experiment description.
 */
typedef struct HimapExperiment HimapExperiment;

/*
 Optimized phase-shifter network.
 */
typedef struct HimapPsn HimapPsn;

/*
 Optimizer settings. Zero fields take the defaults.
 */
typedef struct HimapOptimizerSettings {
  size_t restarts;
  size_t max_sweeps;
  double rel_tol;
} HimapOptimizerSettings;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the calling thread's last error message into `buf` (always NUL
 terminated when `len > 0`) and returns the full message length in bytes,
 excluding the terminator. Pass `buf = NULL` to query the length.

 # Safety
 `buf` must be NULL or point to `len` writable bytes.
 */
size_t himap_last_error_message(char *buf, size_t len);

/*
 Library version as a static NUL-terminated string.
 */
const char *himap_version(void);

/*
 Predicted SQNR in dB of a bypassed array at the given SIR and ENOB.
 */
double himap_predicted_sqnr_db(double sir_db, double enob);

/*
 Writes the half-wavelength ULA response for `theta_deg` as `m`
 interleaved complex values into `out` (`2 m` doubles).

 # Safety
 `out` must point to `2 m` writable doubles.
 */
enum HimapStatus himap_steering_vector(double theta_deg, size_t m, double *out);

/*
 CFAR threshold on the detection statistic for `m` antennas, preamble
 length `l2` and false-alarm rate `far`.

 # Safety
 `out` must point to one writable double.
 */
enum HimapStatus himap_beta_threshold(size_t m, size_t l2, double far, double *out);

/*
 Optimizes the network for the `m` x `m` Hermitian positive-definite
 covariance `cov`. `phase_bits = 0` selects continuous shifters.

 # Safety
 `cov` must point to `2 m m` doubles; `settings` may be NULL; `out` must
 point to a writable handle slot, which receives a new handle on success.
 */
enum HimapStatus himap_psn_optimize(const double *cov,
                                    size_t m,
                                    uint32_t phase_bits,
                                    uint64_t seed,
                                    const struct HimapOptimizerSettings *settings,
                                    struct HimapPsn **out);

/*
 # Safety
 `psn` must be NULL or a handle from [`himap_psn_optimize`] not yet freed.
 */
void himap_psn_free(struct HimapPsn *psn);

/*
 Network order M, or 0 for a NULL handle.

 # Safety
 `psn` must be NULL or a live handle.
 */
size_t himap_psn_order(const struct HimapPsn *psn);

/*
 Copies the `M M` phases (radians, row-major) into `out`.

 # Safety
 `psn` must be a live handle and `out` must hold `len` doubles.
 */
enum HimapStatus himap_psn_phases(const struct HimapPsn *psn, double *out, size_t len);

/*
 Number of entries in the objective trace.

 # Safety
 `psn` must be NULL or a live handle.
 */
size_t himap_psn_trace_len(const struct HimapPsn *psn);

/*
 Copies the whiteness after every row update (starting with the
 initialization) into `out`.

 # Safety
 `psn` must be a live handle and `out` must hold `len` doubles.
 */
enum HimapStatus himap_psn_trace(const struct HimapPsn *psn, double *out, size_t len);

/*
 Whiteness in `[0, 1]` of the network's output for covariance `cov`.

 # Safety
 `psn` must be a live handle, `cov` must hold `2 M M` doubles and `out`
 one double.
 */
enum HimapStatus himap_psn_whiteness(const struct HimapPsn *psn, const double *cov, double *out);

/*
 Parses spec-file text (NUL-terminated UTF-8) into a new handle.

 # Safety
 `text` must be a valid C string; `out` a writable handle slot.
 */
enum HimapStatus himap_experiment_parse(const char *text, struct HimapExperiment **out);

/*
 # Safety
 `exp` must be NULL or a live handle.
 */
void himap_experiment_free(struct HimapExperiment *exp);

/*
 Overrides the root seed.

 # Safety
 `exp` must be a live handle.
 */
enum HimapStatus himap_experiment_set_seed(struct HimapExperiment *exp, uint64_t seed);

/*
 Overrides the trial count (must be positive).

 # Safety
 `exp` must be a live handle.
 */
enum HimapStatus himap_experiment_set_trials(struct HimapExperiment *exp, size_t trials);

/*
 Runs the experiment and returns its CSV text through `csv_out`. Release
 it with [`himap_string_free`].

 # Safety
 `exp` must be a live handle; `csv_out` a writable pointer slot.
 */
enum HimapStatus himap_experiment_run_csv(const struct HimapExperiment *exp, char **csv_out);

/*
 Releases a string returned by this library.

 # Safety
 `s` must be NULL or a string from this library not yet freed.
 */
void himap_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HIMAP_H */
