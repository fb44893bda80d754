// Copyright 2026 The FusionDeepMF Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the fusiondeepmf library.
 *
 * Every function returns an fdmf_status. On failure the thread-local
 * message from fdmf_last_error() describes the problem; output parameters
 * are left untouched. Handles are opaque and owned by the caller, who
 * releases them with the matching *_free function. Strings returned through
 * char** are released with fdmf_string_free.
 */
#ifndef FUSIONDEEPMF_FDMF_H_
#define FUSIONDEEPMF_FDMF_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FDMF_API __declspec(dllexport)
#else
#define FDMF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fdmf_status {
  FDMF_OK = 0,
  FDMF_E_INVALID_ARGUMENT = 1,
  FDMF_E_IO = 2,
  FDMF_E_PARSE = 3,
  FDMF_E_NOT_FOUND = 4,
  FDMF_E_DIVERGED = 5,
  FDMF_E_INTERNAL = 6
} fdmf_status;

typedef enum fdmf_model_kind {
  FDMF_MODEL_MF = 1,
  FDMF_MODEL_MLP = 2,
  FDMF_MODEL_FUSION = 3
} fdmf_model_kind;

typedef enum fdmf_format {
  FDMF_FORMAT_TSV = 0,
  FDMF_FORMAT_KEY_VALUE = 1
} fdmf_format;

typedef struct fdmf_store fdmf_store;
typedef struct fdmf_config fdmf_config;
typedef struct fdmf_model fdmf_model;

/* Receives one text line (no trailing newline) per training epoch or
 * parser warning. */
typedef void (*fdmf_log_fn)(const char* line, void* user_data);

FDMF_API const char* fdmf_version(void);
FDMF_API const char* fdmf_last_error(void);
/* Machine-readable category, e.g. "not-found". */
FDMF_API const char* fdmf_status_name(fdmf_status status);
FDMF_API void fdmf_string_free(char* s);
/* Process-wide log sink; NULL silences logging. */
FDMF_API void fdmf_set_log(fdmf_log_fn fn, void* user_data);

/* ---- stores ---- */
FDMF_API fdmf_status fdmf_store_ingest(const char* reviews_path,
                                       int64_t min_votes, fdmf_store** out);
FDMF_API fdmf_status fdmf_store_load(const char* path, fdmf_store** out);
FDMF_API fdmf_status fdmf_store_save(const fdmf_store* store,
                                     const char* path);
FDMF_API fdmf_status fdmf_store_write_reviews(const fdmf_store* store,
                                              const char* path);
FDMF_API fdmf_status fdmf_store_counts(const fdmf_store* store,
                                       size_t* n_users, size_t* n_products,
                                       size_t* n_ratings,
                                       size_t* n_reliability);
/* Lines skipped by the parser and records dropped by min_votes. */
FDMF_API fdmf_status fdmf_store_ingest_stats(const fdmf_store* store,
                                             size_t* n_warnings,
                                             size_t* n_filtered);
FDMF_API void fdmf_store_free(fdmf_store* store);

FDMF_API fdmf_status fdmf_synth(size_t n_users, size_t n_products,
                                size_t rank, double density,
                                double noise_std, uint64_t seed,
                                fdmf_store** out);

/* Scores every review, optionally writes the breakdown table to
 * breakdown_path (NULL skips it), and returns a copy of the store carrying
 * the scores as its reliability matrix. */
FDMF_API fdmf_status fdmf_reliability(const fdmf_store* store, double alpha,
                                      double threshold, int fallback_max,
                                      const char* breakdown_path,
                                      fdmf_store** out);

/* ---- configuration ---- */
FDMF_API fdmf_status fdmf_config_default(fdmf_config** out);
FDMF_API fdmf_status fdmf_config_load(const char* path, fdmf_config** out);
FDMF_API fdmf_status fdmf_config_parse(const char* json_text,
                                       fdmf_config** out);
/* Overrides one field from its text form. Keys: seed, deterministic,
 * threads, latent_dim, predictive_dim, tower (comma list), lambda, gamma,
 * pretrain, svd_mlp_embeddings, mlp_init (scaled|small), freeze_branches,
 * batch, epochs, mf_epochs, mlp_epochs, fusion_epochs, lr, patience, folds,
 * train, val, test, alpha, threshold, fallback_helpful_max,
 * metric_threshold, cutoffs, ndcg_gain. */
FDMF_API fdmf_status fdmf_config_set(fdmf_config* config, const char* key,
                                     const char* value);
FDMF_API void fdmf_config_free(fdmf_config* config);
/* Loads the data source named in the config (store, reviews or synthetic). */
FDMF_API fdmf_status fdmf_config_load_data(const fdmf_config* config,
                                           fdmf_store** out);

/* ---- training and inference ---- */
/* Trains one branch on the training part of `fold`, early-stopping on its
 * validation part. kind must be FDMF_MODEL_MF or FDMF_MODEL_MLP. */
FDMF_API fdmf_status fdmf_pretrain(const fdmf_store* store,
                                   const fdmf_config* config,
                                   fdmf_model_kind kind, size_t fold,
                                   fdmf_model** out);
/* Fused training. With both branch checkpoints the fusion head is built
 * from them; with neither, pre-training runs inline (or is skipped when
 * the config disables it). */
FDMF_API fdmf_status fdmf_train(const fdmf_store* store,
                                const fdmf_config* config, size_t fold,
                                const fdmf_model* mf, const fdmf_model* mlp,
                                fdmf_model** out);
FDMF_API fdmf_status fdmf_model_load(const char* path, fdmf_model** out);
FDMF_API fdmf_status fdmf_model_save(const fdmf_model* model,
                                     const char* path);
FDMF_API fdmf_status fdmf_model_kind_of(const fdmf_model* model,
                                        fdmf_model_kind* out);
FDMF_API void fdmf_model_free(fdmf_model* model);

/* Raw-scale prediction in [1, 5]; unknown keys give the training mean. */
FDMF_API fdmf_status fdmf_predict(const fdmf_model* model,
                                  const char* user_key,
                                  const char* product_key, double* out);

/* Metrics on the test part of `fold`. */
FDMF_API fdmf_status fdmf_evaluate(const fdmf_model* model,
                                   const fdmf_store* store,
                                   const fdmf_config* config, size_t fold,
                                   fdmf_format format, char** out_text);

/* All folds end to end; per-fold rows, the mean row and, when
 * with_timings is nonzero, per-phase wall-clock comment lines. */
FDMF_API fdmf_status fdmf_run_experiment(const fdmf_store* store,
                                         const fdmf_config* config,
                                         int with_timings, char** out_text);
FDMF_API fdmf_status fdmf_sweep(const fdmf_store* store,
                                const fdmf_config* config,
                                const double* train_fracs, size_t n_fracs,
                                char** out_text);

#ifdef __cplusplus
}
#endif

#endif /* FUSIONDEEPMF_FDMF_H_ */
