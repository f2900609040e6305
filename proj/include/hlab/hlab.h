/* C interface to the halpern-lab core. All functions are thread-safe with
 * respect to distinct handles; error details are kept per thread. */
#ifndef HLAB_H
#define HLAB_H

#include <stdint.h>

#if defined(__GNUC__)
#define HLAB_API __attribute__((visibility("default")))
#else
#define HLAB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hlab_status {
  HLAB_OK = 0,
  HLAB_ERR_CONFIG = 1,     /* malformed config; see hlab_last_error_field */
  HLAB_ERR_DOMAIN = 2,     /* argument outside a function's domain */
  HLAB_ERR_HYPOTHESIS = 3, /* rate requested without its hypotheses */
  HLAB_ERR_NUMERIC = 4,    /* non-finite iterate */
  HLAB_ERR_DIMENSION = 5,
  HLAB_ERR_IO = 6,
  HLAB_ERR_INVALID_ARGUMENT = 7, /* null handle, unknown command */
  HLAB_ERR_INTERNAL = 8
} hlab_status;

typedef struct hlab_experiment hlab_experiment;
typedef struct hlab_result hlab_result;

HLAB_API const char* hlab_version(void);

/* Message and config field path of the last failed call on this thread. */
HLAB_API const char* hlab_last_error(void);
HLAB_API const char* hlab_last_error_field(void);

HLAB_API hlab_status hlab_experiment_load(const char* path, hlab_experiment** out);
HLAB_API hlab_status hlab_experiment_from_json(const char* json_text, hlab_experiment** out);
HLAB_API void hlab_experiment_free(hlab_experiment* exp);

/* Overrides; applied when the experiment is next run. */
HLAB_API hlab_status hlab_experiment_set_seed(hlab_experiment* exp, uint64_t seed);
HLAB_API hlab_status hlab_experiment_set_paths(hlab_experiment* exp, uint64_t paths);
HLAB_API hlab_status hlab_experiment_set_horizon(hlab_experiment* exp, uint64_t horizon);
HLAB_API hlab_status hlab_experiment_set_threads(hlab_experiment* exp, unsigned threads);
HLAB_API hlab_status hlab_experiment_set_out_dir(hlab_experiment* exp, const char* dir);

/* Digest of the canonical config (after overrides). Valid until exp changes. */
HLAB_API hlab_status hlab_experiment_digest(hlab_experiment* exp, const char** digest);

/* command: "simulate", "rates", "verify" or "qlearn". */
HLAB_API hlab_status hlab_run(hlab_experiment* exp, const char* command, hlab_result** out);
HLAB_API void hlab_result_free(hlab_result* res);

typedef struct hlab_counts {
  uint64_t pass;
  uint64_t fail;
  uint64_t inconclusive;
  uint64_t skipped;
} hlab_counts;

HLAB_API hlab_status hlab_result_counts(const hlab_result* res, hlab_counts* out);
/* Owned by res. */
HLAB_API const char* hlab_result_summary_json(const hlab_result* res);
HLAB_API uint64_t hlab_result_num_files(const hlab_result* res);
HLAB_API const char* hlab_result_file(const hlab_result* res, uint64_t i);
HLAB_API uint64_t hlab_result_num_warnings(const hlab_result* res);
HLAB_API const char* hlab_result_warning(const hlab_result* res, uint64_t i);

#ifdef __cplusplus
}
#endif

#endif
