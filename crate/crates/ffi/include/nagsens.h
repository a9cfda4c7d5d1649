#ifndef NAGSENS_H
#define NAGSENS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Values 1 to 4 match the command-line exit codes.
 */
typedef enum NagsStatus {
  NAGS_STATUS_OK = 0,
  NAGS_STATUS_FAILURE = 1,
  NAGS_STATUS_INVALID_INPUT = 2,
  NAGS_STATUS_DEGENERATE = 3,
  NAGS_STATUS_NON_CONVERGENCE = 4,
  NAGS_STATUS_NULL_POINTER = 10,
  NAGS_STATUS_OUT_OF_RANGE = 11,
  NAGS_STATUS_BUFFER_TOO_SMALL = 12,
  NAGS_STATUS_PANIC = 13,
} NagsStatus;

/**
 * Parsed and validated game configuration.
 */
typedef struct NagsConfig NagsConfig;

/**
 * Result tables and diagnostics of one command run.
 */
typedef struct NagsReport NagsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses and validates a JSON configuration document.
 */
enum NagsStatus nags_config_from_json(const char *json, struct NagsConfig **out);

/**
 * Reads, parses and validates a configuration file.
 */
enum NagsStatus nags_config_from_file(const char *path, struct NagsConfig **out);

void nags_config_free(struct NagsConfig *config);

/**
 * Runs a command (`solve`, `certify`, `sens`, `centrality`, `target`,
 * `fj-sim`, `routing-sweep`) on a configuration.
 */
enum NagsStatus nags_run(const struct NagsConfig *config,
                         const char *command,
                         uint64_t seed,
                         struct NagsReport **out);

void nags_report_free(struct NagsReport *report);

/**
 * Number of tables in a report; zero for a null handle.
 */
size_t nags_report_table_count(const struct NagsReport *report);

enum NagsStatus nags_report_table_name(const struct NagsReport *report, size_t index, char **out);

/**
 * CSV text (CRLF line endings) of one table.
 */
enum NagsStatus nags_report_table_csv(const struct NagsReport *report, size_t index, char **out);

/**
 * The whole report as pretty-printed JSON.
 */
enum NagsStatus nags_report_json(const struct NagsReport *report, char **out);

/**
 * Writes the report tables and JSON into `dir` as the CLI does with `--out`.
 */
enum NagsStatus nags_report_write(const struct NagsReport *report, const char *dir);

void nags_string_free(char *s);

/**
 * JSON error object of the last failed call on this thread, or null. The
 * pointer stays valid until the next call on the same thread.
 */
const char *nags_last_error(void);

/**
 * Equilibrium of the configured game at its own parameters. `len` receives
 * the profile length; `out` may be null to query it.
 */
enum NagsStatus nags_equilibrium(const struct NagsConfig *config,
                                 double *out,
                                 size_t capacity,
                                 size_t *len);

/**
 * Leontief matrix `(I − γP)⁻¹` of a row-major `n × n` network, written
 * row-major into `out` (`n²` values).
 */
enum NagsStatus nags_leontief(const double *p, size_t n, double gamma, double *out);

/**
 * Bonacich and key-player centralities of a linear quadratic game with
 * slope `gamma`. Each output holds `n` values.
 */
enum NagsStatus nags_centrality(const double *p,
                                size_t n,
                                double gamma,
                                double *bonacich,
                                double *keyplayer);

/**
 * Response of every player to every shock when the players in `pinned`
 * (zero-based, `count` entries) are held fixed. Row-major `n × n` output.
 */
enum NagsStatus nags_pinned_sensitivity(const double *p,
                                        size_t n,
                                        double gamma,
                                        const size_t *pinned,
                                        size_t count,
                                        double *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nags_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NAGSENS_H */
