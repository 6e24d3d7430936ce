#ifndef RANKDYN_H
#define RANKDYN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes; the nonzero values of 2..=4 match the CLI exit codes.
typedef enum RdStatus {
  RD_STATUS_OK = 0,
  RD_STATUS_NULL_POINTER = 1,
  RD_STATUS_CONFIG = 2,
  RD_STATUS_DATA = 3,
  RD_STATUS_INTERNAL = 4,
  RD_STATUS_PANIC = 5,
} RdStatus;

typedef struct RdArchive RdArchive;

typedef struct RdForecast RdForecast;

typedef struct RdPanel RdPanel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Valid until the next call.
const char *rd_last_error(void);

// Normalized Kendall tau distance of two rankings given as 1-based ranks.
//
// # Safety
// `a` and `b` must point to `n` readable values; `out` must be writable.
enum RdStatus rd_kendall_tau(const uint32_t *a, const uint32_t *b, size_t n, double *out);

// Ranks of `n` scores, rank 1 for the smallest.
//
// # Safety
// `z` must point to `n` readable values and `ranks` to `n` writable ones.
enum RdStatus rd_rank_of_scores(const double *z, size_t n, uint32_t *ranks);

// Reads a ranking CSV.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum RdStatus rd_panel_read_csv(const char *path, struct RdPanel **out);

// Writes a panel as a ranking CSV.
//
// # Safety
// `panel` must be a live handle and `path` a NUL-terminated string.
enum RdStatus rd_panel_write_csv(const struct RdPanel *panel, const char *path);

// Items, rankers and periods of a panel.
//
// # Safety
// `panel` must be a live handle; the out pointers must be writable.
enum RdStatus rd_panel_dims(const struct RdPanel *panel,
                            size_t *n_items,
                            size_t *n_rankers,
                            size_t *n_times);

// Copies the ranks of `(ranker, time)` into `ranks` (length `n_items`).
//
// # Safety
// `panel` must be a live handle and `ranks` must hold `n_items` values.
enum RdStatus rd_panel_ranking(const struct RdPanel *panel,
                               size_t ranker,
                               size_t time,
                               uint32_t *ranks);

// # Safety
// `panel` must be null or a handle not yet freed.
void rd_panel_free(struct RdPanel *panel);

// Generates a simulation scenario (`static1`..`static3`, `dyn1`..`dyn3`)
// at its default size.
//
// # Safety
// `scenario` must be a NUL-terminated string; `out` must be writable.
enum RdStatus rd_simulate(const char *scenario, double sigma, uint64_t seed, struct RdPanel **out);

// Fits the model named in `config_json`, an experiment configuration
// document (only the `model` and `sampler` sections are read).
//
// # Safety
// `panel` must be a live handle, `config_json` a NUL-terminated string and
// `out` writable.
enum RdStatus rd_fit(const struct RdPanel *panel, const char *config_json, struct RdArchive **out);

// Number of kept posterior draws.
//
// # Safety
// `archive` must be a live handle; `out` must be writable.
enum RdStatus rd_archive_n_draws(const struct RdArchive *archive, size_t *out);

// # Safety
// `archive` must be a live handle and `dir` a NUL-terminated string.
enum RdStatus rd_archive_write(const struct RdArchive *archive, const char *dir);

// # Safety
// `dir` must be a NUL-terminated string; `out` must be writable.
enum RdStatus rd_archive_read(const char *dir, struct RdArchive **out);

// # Safety
// `archive` must be null or a handle not yet freed.
void rd_archive_free(struct RdArchive *archive);

// One-step-ahead forecast of the period after the fitted data.
//
// # Safety
// `archive` and `panel` must be live handles; `out` must be writable.
enum RdStatus rd_forecast(const struct RdArchive *archive,
                          const struct RdPanel *panel,
                          size_t samples_per_draw,
                          uint64_t seed,
                          struct RdForecast **out);

// Probability that `item` (0-based) receives `rank` (1-based) for `ranker`.
//
// # Safety
// `forecast` must be a live handle; `out` must be writable.
enum RdStatus rd_forecast_probability(const struct RdForecast *forecast,
                                      size_t ranker,
                                      size_t item,
                                      size_t rank,
                                      double *out);

// Point forecast ranks of `ranker` (length `n_items`).
//
// # Safety
// `forecast` must be a live handle and `ranks` must hold `n_items` values.
enum RdStatus rd_forecast_point(const struct RdForecast *forecast, size_t ranker, uint32_t *ranks);

// # Safety
// `forecast` must be null or a handle not yet freed.
void rd_forecast_free(struct RdForecast *forecast);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RANKDYN_H */
