/* SPDX-License-Identifier: Apache-2.0 */
/*
 * sul — subject-level unlearning toolkit, C API.
 *
 * Opaque-handle interface over the C++ core. Every function that can fail
 * returns a sul_status; on failure a thread-local message is available from
 * sul_last_error(). Handles are created by sul_*_new/load/run functions and
 * released with the matching sul_*_free (free functions accept NULL).
 * Returned const char* pointers borrow from the handle they came from and
 * stay valid until that handle is freed.
 */
#ifndef SUL_H
#define SUL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SUL_API __declspec(dllexport)
#else
#define SUL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sul_status {
  SUL_OK = 0,
  SUL_ERR_PARAM = 1,     /* invalid argument / precondition violation */
  SUL_ERR_DATA = 2,      /* unusable dataset */
  SUL_ERR_IO = 3,        /* file read/write failure */
  SUL_ERR_ARCH = 4,      /* shape mismatch */
  SUL_ERR_HYGIENE = 5,   /* split-hygiene violation */
  SUL_ERR_FREEZE = 6,    /* frozen-backbone mismatch */
  SUL_ERR_PARTITION = 7, /* clip sets overlap */
  SUL_ERR_LOOKUP = 8,    /* unknown subject or clip id */
  SUL_ERR_INGEST = 9,    /* malformed input file */
  SUL_ERR_CONFIG = 10,   /* malformed scenario config */
  SUL_ERR_INTERNAL = 11
} sul_status;

SUL_API const char* sul_version(void);
/* Message of the last failing call on this thread ("" if none). */
SUL_API const char* sul_last_error(void);

/* --------------------------------------------------------------------- */
/* Opaque handles                                                         */
/* --------------------------------------------------------------------- */

typedef struct sul_pool sul_pool;             /* subject-indexed clip pool  */
typedef struct sul_split sul_split;           /* subject-disjoint split     */
typedef struct sul_model sul_model;           /* model checkpoint           */
typedef struct sul_ranking sul_ranking;       /* subject score ranking      */
typedef struct sul_forget_set sul_forget_set; /* top-K forget-set           */
typedef struct sul_config sul_config;         /* scenario configuration     */
typedef struct sul_report sul_report;         /* scenario report            */

/* --------------------------------------------------------------------- */
/* Plain structs crossing the ABI                                         */
/* --------------------------------------------------------------------- */

typedef struct sul_protocol {
  int32_t epochs;
  int32_t batch_size;
  double learning_rate;
  uint64_t seed;
  int32_t selection; /* 0 = final-epoch, 1 = best-train-loss */
} sul_protocol;

typedef struct sul_ledger {
  uint64_t gradient_steps;
  uint64_t clips_processed;
  double wall_seconds; /* informational */
} sul_ledger;

/* Ledgers serialize as small JSON documents alongside checkpoints. */
SUL_API sul_status sul_ledger_save(const sul_ledger* ledger, const char* path);
SUL_API sul_status sul_ledger_load(const char* path, sul_ledger* out);

typedef struct sul_unlearn_params {
  double lambda_cons;
  double lambda_forg;
  double lambda_reg;
  uint64_t steps;
  double learning_rate;
  int32_t batch_r;
  int32_t batch_f;
  uint64_t seed;
} sul_unlearn_params;

typedef struct sul_ogr_record {
  double m_b;
  double m_u;
  double m_o;
  double delta_oracle;
  double delta_res;
  double ogr;      /* valid only when defined != 0 */
  int32_t defined; /* OGR exists iff m_o > m_b */
} sul_ogr_record;

/* --------------------------------------------------------------------- */
/* Pool                                                                   */
/* --------------------------------------------------------------------- */

SUL_API sul_status sul_pool_generate(int32_t num_subjects, int32_t clips_min, int32_t clips_max,
                                     int32_t feature_dim, int32_t num_classes,
                                     double class_separation, uint64_t seed, sul_pool** out);
SUL_API sul_status sul_pool_load_csv(const char* path, int32_t expected_classes, sul_pool** out);
SUL_API sul_status sul_pool_save_csv(const sul_pool* pool, const char* path);
/* flip_mode: 0 = uniform-random-other-class, 1 = fixed target class.
 * feature_shift may be NULL (zero shift) or have feature_dim entries. */
SUL_API sul_status sul_pool_corrupt(const sul_pool* pool, const char* const* subject_ids,
                                    size_t n_subjects, double flip_rate, int32_t flip_mode,
                                    int32_t fixed_target_class, const double* feature_shift,
                                    uint64_t seed, sul_pool** out);
SUL_API size_t sul_pool_num_subjects(const sul_pool* pool);
SUL_API size_t sul_pool_num_clips(const sul_pool* pool);
SUL_API int32_t sul_pool_feature_dim(const sul_pool* pool);
SUL_API int32_t sul_pool_num_classes(const sul_pool* pool);
SUL_API void sul_pool_free(sul_pool* pool);

/* --------------------------------------------------------------------- */
/* Split                                                                  */
/* --------------------------------------------------------------------- */

SUL_API sul_status sul_split_make(const sul_pool* pool, double eval_fraction, uint64_t seed,
                                  sul_split** out);
SUL_API size_t sul_split_train_count(const sul_split* split);
SUL_API size_t sul_split_eval_count(const sul_split* split);
SUL_API void sul_split_free(sul_split* split);

/* --------------------------------------------------------------------- */
/* Model                                                                  */
/* --------------------------------------------------------------------- */

SUL_API sul_status sul_model_load(const char* path, sul_model** out);
SUL_API sul_status sul_model_save(const sul_model* model, const char* path);
/* probs must hold sul_model_num_classes() doubles. */
SUL_API sul_status sul_model_predict(const sul_model* model, const double* features,
                                     size_t feature_dim, double* probs);
SUL_API int32_t sul_model_feature_dim(const sul_model* model);
SUL_API int32_t sul_model_num_classes(const sul_model* model);
SUL_API const char* sul_model_stage(const sul_model* model);
SUL_API void sul_model_free(sul_model* model);

/* --------------------------------------------------------------------- */
/* Training                                                               */
/* --------------------------------------------------------------------- */

SUL_API sul_status sul_train_baseline(const sul_pool* pool, const sul_split* split,
                                      const sul_protocol* protocol, int32_t hidden_dim,
                                      sul_model** out, sul_ledger* ledger);
SUL_API sul_status sul_train_oracle(const sul_pool* pool, const sul_split* split,
                                    const sul_forget_set* forget_set,
                                    const sul_protocol* protocol, int32_t hidden_dim,
                                    sul_model** out, sul_ledger* ledger);
SUL_API sul_status sul_finetune_naive(const sul_model* baseline, const sul_pool* pool,
                                      const sul_split* split, const sul_forget_set* forget_set,
                                      const sul_protocol* short_protocol, sul_model** out,
                                      sul_ledger* ledger);

/* --------------------------------------------------------------------- */
/* Scoring and forget-sets                                                */
/* --------------------------------------------------------------------- */

SUL_API sul_status sul_score_subjects(const sul_model* baseline, const sul_pool* pool,
                                      const sul_split* split, sul_ranking** out);
SUL_API size_t sul_ranking_size(const sul_ranking* ranking);
SUL_API sul_status sul_ranking_entry(const sul_ranking* ranking, size_t index,
                                     const char** subject_id, double* score,
                                     int32_t* clip_count);
SUL_API sul_status sul_ranking_save_csv(const sul_ranking* ranking, const char* path);
SUL_API sul_status sul_forget_set_build(const sul_ranking* ranking, int32_t k,
                                        sul_forget_set** out);
SUL_API size_t sul_forget_set_size(const sul_forget_set* fs);
SUL_API const char* sul_forget_set_subject(const sul_forget_set* fs, size_t index);
SUL_API const char* sul_forget_set_hash_hex(const sul_forget_set* fs);
SUL_API void sul_ranking_free(sul_ranking* ranking);
SUL_API void sul_forget_set_free(sul_forget_set* fs);

/* --------------------------------------------------------------------- */
/* Unlearning                                                             */
/* --------------------------------------------------------------------- */

/* trace_csv_path may be NULL; when given, the per-step loss trace is written
 * there (step,l_ret,l_cons,l_forg,l_reg,l_unl). */
SUL_API sul_status sul_unlearn_run(const sul_model* baseline, const sul_pool* pool,
                                   const sul_split* split, const sul_forget_set* forget_set,
                                   const sul_unlearn_params* params, const char* trace_csv_path,
                                   sul_model** out, sul_ledger* ledger);
SUL_API sul_status sul_forgetting_strength(const sul_model* baseline, const sul_model* updated,
                                           const sul_pool* pool, const sul_split* split,
                                           const sul_forget_set* forget_set, double* out);

/* --------------------------------------------------------------------- */
/* Metrics                                                                */
/* --------------------------------------------------------------------- */

/* split_tag: 0 = eval split, 1 = retained training clips, 2 = forgotten
 * training clips. forget_set may be NULL for tags 0 and 1 (1 then covers the
 * whole training split); tag 2 requires one. confusion may be NULL or point
 * at C*C uint64 slots, row-major [label][predicted]. */
SUL_API sul_status sul_evaluate(const sul_model* model, const sul_pool* pool,
                                const sul_split* split, int32_t split_tag,
                                const sul_forget_set* forget_set, double* accuracy,
                                uint64_t* confusion);
SUL_API sul_status sul_ogr(double m_b, double m_u, double m_o, sul_ogr_record* out);
SUL_API sul_status sul_relative_compute(const sul_ledger* stage, const sul_ledger* baseline,
                                        double* out);

/* --------------------------------------------------------------------- */
/* Scenario harness                                                       */
/* --------------------------------------------------------------------- */

SUL_API sul_status sul_config_load(const char* path, sul_config** out);
/* Overrides: replace the seed list with one seed, redirect output, replace
 * formats ("csv,json"). Pass NULL to keep the config value. */
SUL_API sul_status sul_config_override(sul_config* config, const char* seed,
                                       const char* output_dir, const char* formats);
SUL_API const char* sul_config_output_dir(const sul_config* config);
SUL_API size_t sul_config_num_ks(const sul_config* config);
SUL_API void sul_config_free(sul_config* config);

/* Builds the replicate's pool/split/corruption exactly as `run` would, then
 * writes the pool CSV. Uses the first configured seed. */
SUL_API sul_status sul_config_prepare_pool(const sul_config* config, sul_pool** out_pool,
                                           sul_split** out_split);
SUL_API sul_status sul_config_stage_seeds(const sul_config* config, uint64_t* train_seed,
                                          uint64_t* unlearn_seed_base, uint64_t* naive_seed_base);
SUL_API sul_status sul_config_protocol(const sul_config* config, sul_protocol* out);
SUL_API sul_status sul_config_short_ft(const sul_config* config, int32_t k, sul_protocol* out);
SUL_API sul_status sul_config_unlearn_params(const sul_config* config,
                                             const sul_ledger* baseline_ledger, int32_t k,
                                             sul_unlearn_params* out);
SUL_API int32_t sul_config_hidden_dim(const sul_config* config);

SUL_API sul_status sul_scenario_run(const sul_config* config, sul_report** out);
SUL_API sul_status sul_report_load(const char* report_json_path, sul_report** out);
/* Writes the report file set; formats is a comma list ("csv,json"). */
SUL_API sul_status sul_report_emit(const sul_report* report, const char* out_dir,
                                   const char* formats);
/* Plot-ready accuracy-vs-K and tradeoff series (needs >= 2 K values). */
SUL_API sul_status sul_report_emit_series(const sul_report* report, const char* out_dir);
SUL_API size_t sul_report_num_seeds(const sul_report* report);
SUL_API void sul_report_free(sul_report* report);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SUL_H */
