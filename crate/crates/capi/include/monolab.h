/* monolab C API — generated by cbindgen; do not edit by hand. */

#ifndef MONOLAB_H
#define MONOLAB_H

/* This file is generated from crates/capi/src/lib.rs. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Complexity-estimate flavors.
typedef enum MonolabKhatVariant {
  MonolabKhatHalting = 0,
  MonolabKhatMonotone = 1,
  MonolabKhatDl = 2,
} MonolabKhatVariant;

// Why a machine run stopped.
typedef enum MonolabRunStatus {
  MonolabRunHalted = 0,
  MonolabRunFuelExhausted = 1,
  MonolabRunOutputLimit = 2,
  MonolabRunInputExhausted = 3,
  MonolabRunEmptyProgram = 4,
} MonolabRunStatus;

// Result codes for every fallible entry point.
typedef enum MonolabStatus {
  MonolabOk = 0,
  MonolabNullPointer = 1,
  MonolabInvalidArgument = 2,
  MonolabParseError = 3,
  MonolabBudgetExceeded = 4,
  MonolabIoError = 5,
  MonolabInternalError = 6,
} MonolabStatus;

// Opaque handle to a shared execution context.
typedef struct MonolabLab MonolabLab;

// Outcome of a machine run.
typedef struct MonolabRunResult {
  enum MonolabRunStatus status;
  uint64_t steps_used;
  // Output bits as ASCII; free with `monolab_string_free`.
  char *output;
} MonolabRunResult;

// Learning verdict of a predictor on a generator's sequence.
typedef struct MonolabLearnVerdict {
  bool learned_at_horizon;
  bool partial;
  uint64_t error_count;
  uint64_t convergence_step;
} MonolabLearnVerdict;

// Outcome of a diagonal duel.
typedef struct MonolabDefeatReport {
  bool all_wrong;
  uint64_t wrong_positions;
  uint64_t pred_code_bits;
  uint64_t diag_code_bits;
} MonolabDefeatReport;

// A complexity upper bound. `found == false` means no witness within the
// caps, and `value_bits`/`witness` are meaningless.
typedef struct MonolabEstimate {
  bool found;
  uint64_t value_bits;
  // Witness rendering (program bits or descriptor s-expression); free with
  // `monolab_string_free`. Null when `found` is false.
  char *witness;
} MonolabEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message on this thread; valid until the next failing call.
// Never null. Do not free.
const char *monolab_last_error(void);

// Releases a string returned by this library. Null is accepted.
//
// # Safety
// `s` must have been returned by a monolab function and not freed before.
void monolab_string_free(char *s);

// Creates an execution context.
struct MonolabLab *monolab_lab_new(void);

// Creates an execution context backed by an on-disk run cache.
// Returns null on failure (see `monolab_last_error`).
//
// # Safety
// `cache_dir` must be a valid NUL-terminated string.
struct MonolabLab *monolab_lab_with_cache(const char *cache_dir);

// Releases an execution context. Null is accepted.
//
// # Safety
// `lab` must have come from `monolab_lab_new`/`monolab_lab_with_cache` and
// must not be used afterwards.
void monolab_lab_free(struct MonolabLab *lab);

// Runs a program on the machine under explicit budgets.
//
// # Safety
// `lab` and `out` must be valid; `program` and `input` must be
// NUL-terminated bit strings (input may be empty).
enum MonolabStatus monolab_vm_run(struct MonolabLab *lab,
                                  const char *program,
                                  const char *input,
                                  uint64_t fuel,
                                  uint64_t max_out,
                                  struct MonolabRunResult *out);

// Disassembles a program: one `IDX OPCODE OPERAND` line per instruction.
//
// # Safety
// `program` must be a NUL-terminated bit string; `out_listing` must be valid.
enum MonolabStatus monolab_vm_disasm(const char *program, char **out_listing);

// Evaluates a generator descriptor to its first `len` symbols.
//
// # Safety
// `lab` must be valid, `descriptor` NUL-terminated, `out_prefix` valid;
// `out_truncated` may be null when the caller does not care.
enum MonolabStatus monolab_seq_eval(struct MonolabLab *lab,
                                    const char *descriptor,
                                    uint64_t len,
                                    uint64_t fuel,
                                    char **out_prefix,
                                    bool *out_truncated);

// Predicts the next symbol after `obs`.
//
// # Safety
// `lab`, `out_bit` must be valid; `predictor` and `obs` NUL-terminated.
enum MonolabStatus monolab_predict(struct MonolabLab *lab,
                                   const char *predictor,
                                   const char *obs,
                                   uint64_t fuel,
                                   uint8_t *out_bit);

// Learning verdict of a predictor on a generator's sequence.
//
// # Safety
// `lab` and `out` must be valid; `predictor` and `generator` NUL-terminated.
enum MonolabStatus monolab_learns(struct MonolabLab *lab,
                                  const char *predictor,
                                  const char *generator,
                                  uint64_t burn_in,
                                  uint64_t horizon,
                                  uint64_t fuel,
                                  struct MonolabLearnVerdict *out);

// Duels a predictor against its own diagonal sequence.
//
// # Safety
// `lab` and `out` must be valid; `predictor` NUL-terminated.
enum MonolabStatus monolab_duel(struct MonolabLab *lab,
                                const char *predictor,
                                uint64_t horizon,
                                uint64_t fuel,
                                struct MonolabDefeatReport *out);

// Complexity upper bound for a target string under the chosen variant.
//
// # Safety
// `lab` and `out` must be valid; `target` NUL-terminated.
enum MonolabStatus monolab_khat(struct MonolabLab *lab,
                                enum MonolabKhatVariant variant,
                                const char *target,
                                uint64_t max_len_bits,
                                uint64_t fuel,
                                struct MonolabEstimate *out);

// First string of length `len` with no generating program shorter than
// `len` bits. `mode` 0 = halting, 1 = monotone.
//
// # Safety
// `lab` and `out_string` must be valid.
enum MonolabStatus monolab_find_incompressible(struct MonolabLab *lab,
                                               uint32_t len,
                                               uint64_t fuel,
                                               uint32_t mode,
                                               char **out_string);

// Library version as a static string. Do not free.
const char *monolab_version(void);

// Time-profile probe: steps at which each of the first `k` output symbols of
// a program appears, written into `out_steps[0..k]`; entries beyond what
// fuel admits are set to `u64::MAX`. Returns the number of symbols produced.
//
// # Safety
// `program` NUL-terminated; `out_steps` must point to at least `k` u64s or
// be null.
uint64_t monolab_time_profile(const char *program, uint64_t k, uint64_t fuel, uint64_t *out_steps);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MONOLAB_H */
