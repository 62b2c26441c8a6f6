/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef RELBC_H
#define RELBC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RelbcStatus {
  RELBC_STATUS_OK = 0,
  RELBC_STATUS_INVALID_ARGUMENT = 1,
  RELBC_STATUS_DOMAIN = 2,
  RELBC_STATUS_DEGENERATE_LAYOUT = 3,
  RELBC_STATUS_INCONSISTENT_TIMING = 4,
  RELBC_STATUS_OTP_EXHAUSTED = 5,
  RELBC_STATUS_PROTOCOL = 6,
  RELBC_STATUS_CONFIG = 7,
  RELBC_STATUS_INTERNAL = 8,
  RELBC_STATUS_NULL_POINTER = 9,
  RELBC_STATUS_PANIC = 10,
} RelbcStatus;

/*
 Opaque planar layout.
 */
typedef struct RelbcLayout RelbcLayout;

typedef struct RelbcBound {
  double eps_b;
  double delta_star;
  double exponential_term;
  double entropy_term;
  double combinatorial_factor;
  uint64_t max_errors;
} RelbcBound;

typedef struct RelbcCommitSolution {
  /*
   Metres.
   */
  double d_bob_pcommit;
  /*
   Radians from the Bob-B0 direction.
   */
  double psi;
  /*
   Seconds after t0.
   */
  double t_commit_upper;
  bool at_max_point;
} RelbcCommitSolution;

typedef struct RelbcExclusion {
  bool a0_excluded;
  bool a1_excluded;
} RelbcExclusion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL after a success.
 The pointer stays valid until the next call into the library on this thread.
 */
const char *relbc_last_error_message(void);

/*
 Creates a layout from distances in metres and the A0-Alice-A1 angle in radians.

 # Safety
 `out` must be valid for writing one pointer.
 */
enum RelbcStatus relbc_layout_new(double d_alice_bob,
                                  double d_alice_a0,
                                  double d_alice_a1,
                                  double d_a0_b0,
                                  double d_a1_b1,
                                  double theta,
                                  struct RelbcLayout **out);

/*
 The field-test layout: 9.3 km and 12.3 km arms at 165 degrees.

 # Safety
 `out` must be valid for writing one pointer.
 */
enum RelbcStatus relbc_layout_field_test(struct RelbcLayout **out);

/*
 Releases a layout. NULL is ignored.

 # Safety
 `layout` must come from `relbc_layout_*` and not have been freed.
 */
void relbc_layout_free(struct RelbcLayout *layout);

/*
 Distance between A0 and A1 in metres.

 # Safety
 `layout` must be a live handle; `out` must be valid for writing.
 */
enum RelbcStatus relbc_layout_d_a0_a1(const struct RelbcLayout *layout, double *out);

/*
 Binding parameter for the given thresholds.

 # Safety
 `out` must be valid for writing.
 */
enum RelbcStatus relbc_epsilon_b(uint64_t n_tol,
                                 double e_tol,
                                 double eps_rect,
                                 double eps_diag,
                                 struct RelbcBound *out);

/*
 Upper bound on the multi-photon probability per pulse.

 # Safety
 `out` must be valid for writing.
 */
enum RelbcStatus relbc_p_multi(double mu, double intensity_fluctuation, double *out);

/*
 Deviation of the multi-photon fraction that fails with probability `eps`.

 # Safety
 `out` must be valid for writing.
 */
enum RelbcStatus relbc_delta_multi(double p_multi, uint64_t n_sent, double eps, double *out);

/*
 Worst-case single-photon detections. Never fails.
 */
uint64_t relbc_estimate_n_single(uint64_t n_detect,
                                 uint64_t n_sent,
                                 double p_multi,
                                 double delta_multi);

/*
 Latest commit time after `t0` with Bob at Alice and each B_i at A_i.

 # Safety
 `out` must be valid for writing.
 */
enum RelbcStatus relbc_t_max_simple(double t0,
                                    double t_b0,
                                    double t_b1,
                                    double d_a0_a1,
                                    double *out);

/*
 Latest commitment instant and point consistent with the reveal timings.

 # Safety
 `layout` must be a live handle; `out` must be valid for writing.
 */
enum RelbcStatus relbc_solve_commit_point(const struct RelbcLayout *layout,
                                          double t0,
                                          double t_b0,
                                          double t_b1,
                                          struct RelbcCommitSolution *out);

/*
 Whether the timings rule out a commitment at A0 or A1.

 # Safety
 `layout` must be a live handle; `out` must be valid for writing.
 */
enum RelbcStatus relbc_location_exclusion(const struct RelbcLayout *layout,
                                          double t0,
                                          double t_b0,
                                          double t_b1,
                                          struct RelbcExclusion *out);

/*
 Runs a CLI command (`run`, `bound`, `geometry` or `attack`) on config text
 in the `key = value` format and returns the JSON report.

 # Safety
 `command` and `config_text` must be NUL-terminated strings; `out_json`
 must be valid for writing. Release the result with `relbc_string_free`.
 */
enum RelbcStatus relbc_command_json(const char *command, const char *config_text, char **out_json);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void relbc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELBC_H */
