#ifndef REMSIM_H
#define REMSIM_H

#include <stddef.h>
#include <stdint.h>

#if defined(REMSIM_BUILDING)
#define REMSIM_API __attribute__((visibility("default")))
#else
#define REMSIM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes for the CLI. */
typedef enum remsim_status {
  REMSIM_OK = 0,
  REMSIM_ERR_IO = 1,
  REMSIM_ERR_CONFIG = 2,
  REMSIM_ERR_SIM = 3,
  REMSIM_ERR_ARG = 4
} remsim_status;

typedef struct remsim_config remsim_config;
typedef struct remsim_result remsim_result;

/* Message for the last failing call on this thread; never NULL. */
REMSIM_API const char* remsim_last_error(void);
REMSIM_API const char* remsim_version(void);
/* Releases strings returned through char** out-parameters. */
REMSIM_API void remsim_string_free(char* s);

/* ---- configuration ---- */

REMSIM_API remsim_status remsim_config_new(remsim_config** out);
REMSIM_API remsim_status remsim_config_parse(const char* text, remsim_config** out);
REMSIM_API remsim_status remsim_config_load(const char* path, remsim_config** out);
REMSIM_API void remsim_config_free(remsim_config* cfg);
REMSIM_API remsim_status remsim_config_set(remsim_config* cfg, const char* key, const char* value);
REMSIM_API remsim_status remsim_config_get(const remsim_config* cfg, const char* key, char** out);
REMSIM_API remsim_status remsim_config_validate(const remsim_config* cfg);
REMSIM_API remsim_status remsim_config_render(const remsim_config* cfg, char** out);

REMSIM_API size_t remsim_config_key_count(void);
REMSIM_API const char* remsim_config_key_name(size_t i);
REMSIM_API const char* remsim_config_key_doc(size_t i);

/* ---- single simulations ---- */

REMSIM_API remsim_status remsim_run(const remsim_config* cfg, remsim_result** out);
REMSIM_API void remsim_result_free(remsim_result* r);
REMSIM_API unsigned remsim_result_cores(const remsim_result* r);
REMSIM_API uint64_t remsim_result_cycles(const remsim_result* r);
REMSIM_API uint64_t remsim_result_retired(const remsim_result* r, unsigned core);
REMSIM_API double remsim_result_ipc(const remsim_result* r, unsigned core);
REMSIM_API uint64_t remsim_result_digest(const remsim_result* r, unsigned core);
/* Stats table as CSV text. */
REMSIM_API remsim_status remsim_result_stats_csv(const remsim_result* r, char** out);
/* Writes stats, runahead intervals and (EMC modes only) EMC intervals.
   Any path may be NULL to skip that file. */
REMSIM_API remsim_status remsim_result_write(const remsim_result* r, const char* stats_path,
                                             const char* runahead_path, const char* emc_path);

/* ---- traces ---- */

/* spec is gen:<kind>[:k=v,...]; the result is written in text trace format. */
REMSIM_API remsim_status remsim_generate_trace(const char* spec, uint64_t seed, const char* path);

/* ---- experiment matrix ---- */

/* overrides: n strings of the form key=value applied after the spec file.
   failed_cells receives the number of cells that did not finish. */
REMSIM_API remsim_status remsim_matrix(const char* spec_path, const char* const* overrides, size_t n,
                                       unsigned parallelism, const char* out_dir, size_t* failed_cells);

/* ---- policy lab ---- */

/* policy: pc-based, max-misses, stall-oracle, or NULL for all three. */
REMSIM_API remsim_status remsim_lab(const remsim_config* cfg, unsigned core, size_t max_stalls, const char* policy,
                                    const char* csv_path, const char* summary_path);

/* ---- comparison ---- */

/* Delta report between two stats CSVs as CSV text. */
REMSIM_API remsim_status remsim_compare(const char* path_a, const char* path_b, char** out);

#ifdef __cplusplus
}
#endif

#endif
