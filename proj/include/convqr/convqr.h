/* Copyright 2026 The convqr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to convqr.
 *
 * Every fallible call returns a cqr_status. On failure a description is
 * available from cqr_last_error() until the next failing call on the same
 * thread. Handles are opaque and owned by the caller; release them with the
 * matching *_free function (NULL is accepted). Strings returned through
 * `char**` are heap allocated and released with cqr_string_free. Strings
 * returned as `const char*` are owned by the handle they came from.
 *
 * Options structs must be initialized with their *_init function, which
 * fills in the defaults; NULL string fields mean "not set".
 */

#ifndef CONVQR_CONVQR_H_
#define CONVQR_CONVQR_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CQR_API __declspec(dllexport)
#else
#define CQR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cqr_status {
  CQR_OK = 0,
  CQR_ERR_ARGUMENT = 1,   /* NULL handle or out pointer, bad enum string */
  CQR_ERR_VALIDATION = 2, /* malformed or inconsistent input */
  CQR_ERR_RUNTIME = 3,    /* failure while computing */
  CQR_ERR_IO = 4          /* unreadable or unwritable file */
} cqr_status;

CQR_API const char* cqr_last_error(void);
CQR_API const char* cqr_status_string(cqr_status status);
CQR_API const char* cqr_version(void);
CQR_API void cqr_string_free(char* s);

/* Writes a file atomically (temporary file + rename), creating parents. */
CQR_API cqr_status cqr_write_text_file(const char* path, const char* content);

/* ---- corpus ----------------------------------------------------------- */

typedef struct cqr_corpus cqr_corpus;

CQR_API cqr_status cqr_corpus_load(const char* passages_path, cqr_corpus** out);
CQR_API void cqr_corpus_free(cqr_corpus* corpus);
CQR_API size_t cqr_corpus_size(const cqr_corpus* corpus);
/* Passages are ordered by id. */
CQR_API const char* cqr_corpus_passage_id(const cqr_corpus* corpus, size_t index);
CQR_API const char* cqr_corpus_passage_text(const cqr_corpus* corpus, size_t index);

/* ---- dataset: one example per user turn -------------------------------- */

typedef struct cqr_dataset cqr_dataset;

CQR_API cqr_status cqr_dataset_load(const char* dialogues_path, int replace_first,
                                    cqr_dataset** out);
CQR_API void cqr_dataset_free(cqr_dataset* dataset);
CQR_API size_t cqr_dataset_size(const cqr_dataset* dataset);
CQR_API const char* cqr_dataset_example_id(const cqr_dataset* dataset, size_t index);
CQR_API const char* cqr_dataset_question(const cqr_dataset* dataset, size_t index);
/* NULL when the example has no human rewrite. */
CQR_API const char* cqr_dataset_human_rewrite(const cqr_dataset* dataset, size_t index);
CQR_API cqr_status cqr_dataset_context_string(const cqr_dataset* dataset, size_t index,
                                              size_t max_tokens, char** out);

/* ---- retrievers --------------------------------------------------------- */

typedef struct cqr_retriever cqr_retriever;

typedef struct cqr_hit {
  size_t passage;  /* index into the retriever's passage list */
  double score;
} cqr_hit;

/* kind: "bm25" or "dense". dense_dim is ignored for bm25. */
CQR_API cqr_status cqr_retriever_build(const cqr_corpus* corpus, const char* kind,
                                       size_t dense_dim, cqr_retriever** out);
CQR_API cqr_status cqr_retriever_load(const char* index_path, cqr_retriever** out);
CQR_API cqr_status cqr_retriever_save(const cqr_retriever* retriever, const char* index_path);
CQR_API void cqr_retriever_free(cqr_retriever* retriever);
CQR_API const char* cqr_retriever_kind(const cqr_retriever* retriever);
CQR_API size_t cqr_retriever_size(const cqr_retriever* retriever);
CQR_API const char* cqr_retriever_passage_id(const cqr_retriever* retriever, size_t passage);
/* Writes at most `capacity` hits, best first; *n_hits receives the count. */
CQR_API cqr_status cqr_retriever_search(const cqr_retriever* retriever, const char* query,
                                        size_t k, cqr_hit* hits, size_t capacity,
                                        size_t* n_hits);

/* ---- policy ------------------------------------------------------------- */

typedef struct cqr_policy cqr_policy;

CQR_API size_t cqr_policy_feature_dim(void);
CQR_API cqr_status cqr_policy_create(const double* weights, size_t dim, double threshold,
                                     cqr_policy** out);
CQR_API cqr_status cqr_policy_load(const char* checkpoint_path, cqr_policy** out);
CQR_API cqr_status cqr_policy_save(const cqr_policy* policy, const char* checkpoint_path);
CQR_API void cqr_policy_free(cqr_policy* policy);
CQR_API const double* cqr_policy_weights(const cqr_policy* policy);
CQR_API double cqr_policy_threshold(const cqr_policy* policy);
/* Greedy rewrite of one example; features use the corpus idf statistics. */
CQR_API cqr_status cqr_policy_rewrite(const cqr_policy* policy, const cqr_corpus* corpus,
                                      const cqr_dataset* dataset, size_t index, char** out);

/* ---- commands ------------------------------------------------------------ */

typedef struct cqr_synth_options {
  const char* out_dir;
  size_t entities;
  size_t facts;
  size_t dialogues;
  size_t test_dialogues;
  size_t turns;
  double shift_prob;
  double pronoun_prob;
  double nogold_prob;
  uint64_t seed;
} cqr_synth_options;

CQR_API void cqr_synth_options_init(cqr_synth_options* o);
CQR_API cqr_status cqr_synth(const cqr_synth_options* o);

typedef struct cqr_index_options {
  const char* passages;
  const char* out;
  const char* retriever; /* bm25 | dense */
  size_t dense_dim;
} cqr_index_options;

CQR_API void cqr_index_options_init(cqr_index_options* o);
CQR_API cqr_status cqr_index(const cqr_index_options* o);

typedef struct cqr_weaklabel_options {
  const char* dialogues;
  const char* passages;
  const char* out;
  size_t pool_size;
  const char* source; /* auto | human_rewrite | dialogue_context */
  uint64_t seed;
  int replace_first;
} cqr_weaklabel_options;

typedef struct cqr_weaklabel_stats {
  size_t labeled;
  size_t skipped_no_answer;
  size_t low_signal;
  size_t tied;
  size_t rewrites_read;
} cqr_weaklabel_stats;

CQR_API void cqr_weaklabel_options_init(cqr_weaklabel_options* o);
CQR_API cqr_status cqr_weaklabel(const cqr_weaklabel_options* o, cqr_weaklabel_stats* stats);

typedef struct cqr_train_options {
  const char* dialogues;
  const char* passages;
  const char* labels;
  const char* index;
  const char* out_dir;
  const char* init; /* plain | ce-pretrained | checkpoint */
  const char* init_checkpoint;
  const char* optimizer; /* adam | sgd */
  double dev_fraction;
  int replace_first;
  double alpha;
  size_t m;
  size_t batch_size;
  size_t steps;
  double learning_rate;
  int64_t warmup_steps; /* negative: 10% of steps */
  uint64_t seed;
  double ce_mask_fraction;
  size_t eval_every;
  double threshold;
  size_t ce_pretrain_steps;
  double ce_pretrain_lr;
} cqr_train_options;

typedef struct cqr_train_summary {
  size_t train_examples;
  size_t dev_examples;
  size_t rewrites_attached;
  size_t rewrites_consumed;
  size_t steps;
  size_t best_step;
  double initial_dev_accuracy;
  double best_dev_accuracy;
  size_t rewards[3]; /* counts of -1, 0, +1 */
  size_t rewards_out_of_range;
} cqr_train_summary;

CQR_API void cqr_train_options_init(cqr_train_options* o);
CQR_API cqr_status cqr_train(const cqr_train_options* o, cqr_train_summary* summary);

typedef struct cqr_rewrite_options {
  const char* dialogues;
  const char* passages;
  const char* checkpoint;
  const char* out;
  const char* source; /* policy | question-only | dialogue-context | human-rewrite */
  const char* mode;   /* greedy | brevity */
  size_t target_len;
  int replace_first;
} cqr_rewrite_options;

CQR_API void cqr_rewrite_options_init(cqr_rewrite_options* o);
CQR_API cqr_status cqr_rewrite(const cqr_rewrite_options* o, size_t* n_written);

typedef struct cqr_retrieve_options {
  const char* queries;
  const char* index;
  const char* out;
  size_t k;
  const char* tag;
} cqr_retrieve_options;

CQR_API void cqr_retrieve_options_init(cqr_retrieve_options* o);
CQR_API cqr_status cqr_retrieve(const cqr_retrieve_options* o, size_t* n_queries);

#define CQR_MAX_KS 8

typedef struct cqr_eval_options {
  const char* run;
  const char* qrels;
  const char* dialogues; /* optional subset tags */
  const char* out;       /* optional report path */
  const char* mode;      /* original | updated */
  size_t ks[CQR_MAX_KS];
  size_t n_ks;
} cqr_eval_options;

typedef struct cqr_metrics {
  double mrr;
  double recall[CQR_MAX_KS]; /* aligned with the requested ks */
  size_t n_total;
  size_t n_valid;
} cqr_metrics;

CQR_API void cqr_eval_options_init(cqr_eval_options* o);
/* *table (optional) receives a human-readable report. */
CQR_API cqr_status cqr_eval(const cqr_eval_options* o, cqr_metrics* overall, char** table);

typedef struct cqr_analyze_options {
  const char* dialogues;
  const char* passages;
  const char* qrels;
  const char* run;
  const char* split; /* topic | length */
  const char* stats; /* rewrites.jsonl */
  const char* out;
  const char* mode;
} cqr_analyze_options;

CQR_API void cqr_analyze_options_init(cqr_analyze_options* o);
CQR_API cqr_status cqr_analyze(const cqr_analyze_options* o, char** table);

typedef struct cqr_pipeline_options {
  const char* out_dir;
  const char* retriever;
  size_t dense_dim;
  const char* eval_mode;
  cqr_synth_options synth;         /* out_dir ignored */
  cqr_weaklabel_options weaklabel; /* paths ignored */
  cqr_train_options train;         /* paths ignored */
} cqr_pipeline_options;

typedef struct cqr_pipeline_summary {
  cqr_train_summary train;
  cqr_weaklabel_stats labeling;
  cqr_metrics policy;
  cqr_metrics zero_policy;
  cqr_metrics question_only;
  cqr_metrics human_rewrite;
} cqr_pipeline_summary;

CQR_API void cqr_pipeline_options_init(cqr_pipeline_options* o);
CQR_API cqr_status cqr_pipeline(const cqr_pipeline_options* o, cqr_pipeline_summary* summary);

#ifdef __cplusplus
}
#endif

#endif /* CONVQR_CONVQR_H_ */
