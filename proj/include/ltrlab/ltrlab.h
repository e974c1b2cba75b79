#ifndef LTRLAB_H
#define LTRLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Stable C interface to the ranking workbench. All functions returning
 * ltr_status set a thread-local message readable via ltr_last_error() on
 * failure. Strings returned through char** are heap-allocated; release them
 * with ltr_string_free. Handles are released with their _free function. */

typedef enum ltr_status {
  LTR_OK = 0,
  LTR_INVALID_ARGUMENT = 1,
  LTR_PARSE_ERROR = 2,
  LTR_IO_ERROR = 3,
  LTR_NOT_FOUND = 4,
  LTR_SCHEMA_MISMATCH = 5,
  LTR_DIVERGED = 6,
  LTR_GENERATION_FAILED = 7,
  LTR_FORMAT_ERROR = 8,
  LTR_INTERNAL = 9
} ltr_status;

typedef struct ltr_dataset ltr_dataset;
typedef struct ltr_model ltr_model;

const char* ltr_version(void);
const char* ltr_last_error(void);
void ltr_string_free(char* s);

/* config_json: generator config object; "{}" selects every default.
 * Generation is deterministic in (config, seed). */
ltr_status ltr_dataset_generate(const char* config_json, uint64_t seed, ltr_dataset** out);
ltr_status ltr_dataset_load(const char* jsonl_path, const char* schema_path,
                            ltr_dataset** out);
ltr_status ltr_dataset_save(const ltr_dataset* d, const char* jsonl_path,
                            const char* schema_path);
/* Boundary timestamp split: earliest ceil(fraction * lists) lists train. */
ltr_status ltr_dataset_split(const ltr_dataset* d, double train_fraction,
                             ltr_dataset** train, ltr_dataset** test);
ltr_status ltr_dataset_size(const ltr_dataset* d, size_t* out_lists);
void ltr_dataset_free(ltr_dataset* d);

/* config_json selects the model family via "kind": two_tower, cross_encoder,
 * or transformer (neural trainer keys, optional "preset": desk|paper), gbdt
 * (boosting keys, optional preset), random ("seed"), or oracle (no keys;
 * requires a generated dataset). An optional "name" key labels the artifact
 * for reports and baseline matching. log_json_out (optional) receives
 * per-epoch or per-round training telemetry. */
ltr_status ltr_train(const ltr_dataset* train, const char* config_json,
                     char** log_json_out, ltr_model** out);

ltr_status ltr_model_save(const ltr_model* m, const char* path);
ltr_status ltr_model_load(const char* path, ltr_model** out);
/* Pointers valid for the model's lifetime. */
const char* ltr_model_kind(const ltr_model* m);
const char* ltr_model_name(const ltr_model* m);
void ltr_model_free(ltr_model* m);

/* Scores one list. Pass out_scores = NULL to query the needed length via
 * out_count, then call again with a buffer of at least that capacity. */
ltr_status ltr_score_list(const ltr_model* m, const ltr_dataset* d, size_t list_index,
                          double* out_scores, size_t capacity, size_t* out_count);

/* report_json_out receives an "evaluate" report object. */
ltr_status ltr_evaluate(const ltr_model* m, const ltr_dataset* test, int cutoff,
                        char** report_json_out);

/* Welch-tested per-list comparison of every model against models[baseline].
 * report_json_out receives a "compare" report object. */
ltr_status ltr_compare(const ltr_model* const* models, size_t count, size_t baseline,
                       const ltr_dataset* test, int cutoff, char** report_json_out);

/* Renders an evaluate/compare/abtest report JSON as "kv", "table", or "csv". */
ltr_status ltr_report_render(const char* report_json, const char* format, char** text_out);

/* Two-sample Welch t-test; result_json_out receives an "abtest" report. */
ltr_status ltr_welch(const double* a, size_t n_a, const double* b, size_t n_b,
                     char** result_json_out);

/* Finite-difference gradient checks; JSON {"checks": [...], "pass": bool}. */
ltr_status ltr_gradcheck(char** report_json_out);

#ifdef __cplusplus
}
#endif

#endif /* LTRLAB_H */
