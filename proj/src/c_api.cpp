// Copyright 2026 The convqr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "convqr/convqr.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "convqr/error.hpp"
#include "convqr/pipeline.hpp"

struct cqr_corpus {
  convqr::Corpus corpus;
  convqr::IdfTable idf;  // policy feature statistics
};

struct cqr_dataset {
  std::vector<convqr::ExampleRecord> examples;
  std::vector<std::string> ids;
};

struct cqr_retriever {
  std::unique_ptr<convqr::Retriever> impl;
};

struct cqr_policy {
  convqr::PolicyParams params;
  double threshold = 0.5;
};

namespace {

thread_local std::string g_last_error;

cqr_status fail(cqr_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs `fn`, translating exceptions into status codes.
template <typename F>
cqr_status guarded(F&& fn) {
  try {
    fn();
    return CQR_OK;
  } catch (const convqr::ValidationError& e) {
    return fail(CQR_ERR_VALIDATION, e.what());
  } catch (const convqr::IoError& e) {
    return fail(CQR_ERR_IO, e.what());
  } catch (const convqr::RuntimeError& e) {
    return fail(CQR_ERR_RUNTIME, e.what());
  } catch (const std::bad_alloc&) {
    return fail(CQR_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(CQR_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(CQR_ERR_RUNTIME, "unknown error");
  }
}

std::string str(const char* s) { return s ? std::string(s) : std::string(); }

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

#define CQR_REQUIRE(ptr)                                                      \
  do {                                                                        \
    if (!(ptr)) return fail(CQR_ERR_ARGUMENT, "null argument: " #ptr);        \
  } while (0)

convqr::SynthConfig to_synth(const cqr_synth_options& o) {
  convqr::SynthConfig c;
  c.n_entities = o.entities;
  c.facts_per_entity = o.facts;
  c.n_dialogues = o.dialogues;
  c.n_test_dialogues = o.test_dialogues;
  c.turns = o.turns;
  c.shift_prob = o.shift_prob;
  c.pronoun_prob = o.pronoun_prob;
  c.nogold_prob = o.nogold_prob;
  c.seed = o.seed;
  return c;
}

convqr::WeakLabelOptions to_weaklabel(const cqr_weaklabel_options& o) {
  convqr::WeakLabelOptions w;
  w.dialogues = str(o.dialogues);
  w.passages = str(o.passages);
  w.out = str(o.out);
  w.pool_size = o.pool_size;
  w.source = o.source ? o.source : "auto";
  w.seed = o.seed;
  w.replace_first = o.replace_first != 0;
  return w;
}

convqr::TrainOptions to_train(const cqr_train_options& o) {
  convqr::TrainOptions t;
  t.dialogues = str(o.dialogues);
  t.passages = str(o.passages);
  t.labels = str(o.labels);
  t.index = str(o.index);
  t.out_dir = str(o.out_dir);
  t.init = o.init ? o.init : "plain";
  t.init_checkpoint = str(o.init_checkpoint);
  t.dev_fraction = o.dev_fraction;
  t.replace_first = o.replace_first != 0;
  auto& c = t.config;
  c.optimizer = convqr::parse_optimizer(o.optimizer ? o.optimizer : "adam");
  c.alpha = o.alpha;
  c.m = o.m;
  c.batch_size = o.batch_size;
  c.steps = o.steps;
  c.learning_rate = o.learning_rate;
  if (o.warmup_steps >= 0) c.warmup_steps = static_cast<std::size_t>(o.warmup_steps);
  c.seed = o.seed;
  c.ce_mask_fraction = o.ce_mask_fraction;
  c.eval_every = o.eval_every;
  c.threshold = o.threshold;
  c.ce_pretrain_steps = o.ce_pretrain_steps;
  c.ce_pretrain_lr = o.ce_pretrain_lr;
  return t;
}

void fill_summary(const convqr::TrainSummary& s, cqr_train_summary* out) {
  if (!out) return;
  const auto& st = s.result.state;
  const auto& stats = s.result.stats;
  out->train_examples = s.train_examples;
  out->dev_examples = s.dev_examples;
  out->rewrites_attached = s.rewrites_attached;
  out->rewrites_consumed = stats.rewrites_consumed;
  out->steps = st.step;
  out->best_step = st.best_step;
  out->initial_dev_accuracy = s.initial_dev_accuracy;
  out->best_dev_accuracy = st.best_dev_accuracy;
  for (int i = 0; i < 3; ++i) out->rewards[i] = stats.rewards.by_value[static_cast<std::size_t>(i)];
  out->rewards_out_of_range = stats.rewards.out_of_range;
}

void fill_stats(const convqr::LabelingStats& s, cqr_weaklabel_stats* out) {
  if (!out) return;
  out->labeled = s.labeled;
  out->skipped_no_answer = s.skipped_no_answer;
  out->low_signal = s.low_signal;
  out->tied = s.tied;
  out->rewrites_read = s.rewrites_read;
}

void fill_metrics(const convqr::MetricSet& m, cqr_metrics* out) {
  if (!out) return;
  *out = cqr_metrics{};
  out->mrr = m.mrr;
  for (std::size_t i = 0; i < m.recall.size() && i < CQR_MAX_KS; ++i) out->recall[i] = m.recall[i].second;
  out->n_total = m.n_total;
  out->n_valid = m.n_valid;
}

}  // namespace

extern "C" {

const char* cqr_last_error(void) { return g_last_error.c_str(); }

const char* cqr_status_string(cqr_status status) {
  switch (status) {
    case CQR_OK: return "ok";
    case CQR_ERR_ARGUMENT: return "invalid argument";
    case CQR_ERR_VALIDATION: return "validation error";
    case CQR_ERR_RUNTIME: return "runtime error";
    case CQR_ERR_IO: return "i/o error";
  }
  return "unknown status";
}

const char* cqr_version(void) { return CONVQR_VERSION; }

void cqr_string_free(char* s) { std::free(s); }

cqr_status cqr_write_text_file(const char* path, const char* content) {
  CQR_REQUIRE(path);
  CQR_REQUIRE(content);
  return guarded([&] { convqr::write_file_atomic(path, content); });
}

// ---- corpus ---------------------------------------------------------------

cqr_status cqr_corpus_load(const char* passages_path, cqr_corpus** out) {
  CQR_REQUIRE(passages_path);
  CQR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto corpus = convqr::load_passages(passages_path);
    auto idf = convqr::corpus_idf(corpus);
    *out = new cqr_corpus{std::move(corpus), std::move(idf)};
  });
}

void cqr_corpus_free(cqr_corpus* corpus) { delete corpus; }

size_t cqr_corpus_size(const cqr_corpus* corpus) { return corpus ? corpus->corpus.size() : 0; }

const char* cqr_corpus_passage_id(const cqr_corpus* corpus, size_t index) {
  if (!corpus || index >= corpus->corpus.size()) return nullptr;
  return corpus->corpus[static_cast<convqr::DocIndex>(index)].id.c_str();
}

const char* cqr_corpus_passage_text(const cqr_corpus* corpus, size_t index) {
  if (!corpus || index >= corpus->corpus.size()) return nullptr;
  return corpus->corpus[static_cast<convqr::DocIndex>(index)].text.c_str();
}

// ---- dataset --------------------------------------------------------------

cqr_status cqr_dataset_load(const char* dialogues_path, int replace_first, cqr_dataset** out) {
  CQR_REQUIRE(dialogues_path);
  CQR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto ds = std::make_unique<cqr_dataset>();
    ds->examples = convqr::explode_all(convqr::load_dialogues(dialogues_path), replace_first != 0);
    for (const auto& ex : ds->examples) ds->ids.push_back(ex.id());
    *out = ds.release();
  });
}

void cqr_dataset_free(cqr_dataset* dataset) { delete dataset; }

size_t cqr_dataset_size(const cqr_dataset* dataset) { return dataset ? dataset->examples.size() : 0; }

const char* cqr_dataset_example_id(const cqr_dataset* dataset, size_t index) {
  if (!dataset || index >= dataset->ids.size()) return nullptr;
  return dataset->ids[index].c_str();
}

const char* cqr_dataset_question(const cqr_dataset* dataset, size_t index) {
  if (!dataset || index >= dataset->examples.size()) return nullptr;
  return dataset->examples[index].question.c_str();
}

const char* cqr_dataset_human_rewrite(const cqr_dataset* dataset, size_t index) {
  if (!dataset || index >= dataset->examples.size()) return nullptr;
  const auto& r = dataset->examples[index].human_rewrite;
  return r ? r->c_str() : nullptr;
}

cqr_status cqr_dataset_context_string(const cqr_dataset* dataset, size_t index, size_t max_tokens,
                                      char** out) {
  CQR_REQUIRE(dataset);
  CQR_REQUIRE(out);
  if (index >= dataset->examples.size()) return fail(CQR_ERR_ARGUMENT, "example index out of range");
  return guarded([&] { *out = dup(convqr::build_context_string(dataset->examples[index], max_tokens)); });
}

// ---- retrievers -----------------------------------------------------------

cqr_status cqr_retriever_build(const cqr_corpus* corpus, const char* kind, size_t dense_dim,
                               cqr_retriever** out) {
  CQR_REQUIRE(corpus);
  CQR_REQUIRE(kind);
  CQR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    const auto k = convqr::parse_retriever_kind(kind);
    *out = new cqr_retriever{convqr::build_retriever(corpus->corpus, k, dense_dim)};
  });
}

cqr_status cqr_retriever_load(const char* index_path, cqr_retriever** out) {
  CQR_REQUIRE(index_path);
  CQR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new cqr_retriever{convqr::load_index(index_path)}; });
}

cqr_status cqr_retriever_save(const cqr_retriever* retriever, const char* index_path) {
  CQR_REQUIRE(retriever);
  CQR_REQUIRE(index_path);
  return guarded([&] { convqr::save_index(*retriever->impl, index_path); });
}

void cqr_retriever_free(cqr_retriever* retriever) { delete retriever; }

const char* cqr_retriever_kind(const cqr_retriever* retriever) {
  return retriever ? retriever->impl->kind().data() : nullptr;
}

size_t cqr_retriever_size(const cqr_retriever* retriever) {
  return retriever ? retriever->impl->size() : 0;
}

const char* cqr_retriever_passage_id(const cqr_retriever* retriever, size_t passage) {
  if (!retriever || passage >= retriever->impl->size()) return nullptr;
  return retriever->impl->passage_id(static_cast<convqr::DocIndex>(passage)).c_str();
}

cqr_status cqr_retriever_search(const cqr_retriever* retriever, const char* query, size_t k,
                                cqr_hit* hits, size_t capacity, size_t* n_hits) {
  CQR_REQUIRE(retriever);
  CQR_REQUIRE(query);
  CQR_REQUIRE(n_hits);
  if (capacity > 0 && !hits) return fail(CQR_ERR_ARGUMENT, "null argument: hits");
  *n_hits = 0;
  return guarded([&] {
    const auto found = retriever->impl->retrieve(query, k);
    const std::size_t n = std::min(found.size(), capacity);
    for (std::size_t i = 0; i < n; ++i) hits[i] = cqr_hit{found[i].doc, found[i].score};
    *n_hits = n;
  });
}

// ---- policy ---------------------------------------------------------------

size_t cqr_policy_feature_dim(void) { return convqr::kFeatureDim; }

cqr_status cqr_policy_create(const double* weights, size_t dim, double threshold, cqr_policy** out) {
  CQR_REQUIRE(out);
  *out = nullptr;
  if (dim != convqr::kFeatureDim)
    return fail(CQR_ERR_VALIDATION, "policy weights must have dimension " + std::to_string(convqr::kFeatureDim));
  if (!(threshold > 0.0 && threshold < 1.0)) return fail(CQR_ERR_VALIDATION, "threshold must lie in (0, 1)");
  auto p = std::make_unique<cqr_policy>();
  p->params = convqr::PolicyParams::zeros();
  if (weights) p->params.w.assign(weights, weights + dim);
  p->threshold = threshold;
  *out = p.release();
  return CQR_OK;
}

cqr_status cqr_policy_load(const char* checkpoint_path, cqr_policy** out) {
  CQR_REQUIRE(checkpoint_path);
  CQR_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto p = std::make_unique<cqr_policy>();
    p->params = convqr::load_policy(checkpoint_path, &p->threshold);
    *out = p.release();
  });
}

cqr_status cqr_policy_save(const cqr_policy* policy, const char* checkpoint_path) {
  CQR_REQUIRE(policy);
  CQR_REQUIRE(checkpoint_path);
  return guarded([&] { convqr::save_policy(checkpoint_path, policy->params, policy->threshold); });
}

void cqr_policy_free(cqr_policy* policy) { delete policy; }

const double* cqr_policy_weights(const cqr_policy* policy) {
  return policy ? policy->params.w.data() : nullptr;
}

double cqr_policy_threshold(const cqr_policy* policy) { return policy ? policy->threshold : 0.0; }

cqr_status cqr_policy_rewrite(const cqr_policy* policy, const cqr_corpus* corpus,
                              const cqr_dataset* dataset, size_t index, char** out) {
  CQR_REQUIRE(policy);
  CQR_REQUIRE(corpus);
  CQR_REQUIRE(dataset);
  CQR_REQUIRE(out);
  if (index >= dataset->examples.size()) return fail(CQR_ERR_ARGUMENT, "example index out of range");
  return guarded([&] {
    const auto input = convqr::featurize(dataset->examples[index], corpus->idf);
    *out = dup(convqr::greedy_rewrite(policy->params, input, policy->threshold).text);
  });
}

// ---- commands -------------------------------------------------------------

void cqr_synth_options_init(cqr_synth_options* o) {
  if (!o) return;
  const convqr::SynthConfig d;
  *o = cqr_synth_options{};
  o->entities = d.n_entities;
  o->facts = d.facts_per_entity;
  o->dialogues = d.n_dialogues;
  o->test_dialogues = d.n_test_dialogues;
  o->turns = d.turns;
  o->shift_prob = d.shift_prob;
  o->pronoun_prob = d.pronoun_prob;
  o->nogold_prob = d.nogold_prob;
  o->seed = d.seed;
}

cqr_status cqr_synth(const cqr_synth_options* o) {
  CQR_REQUIRE(o);
  CQR_REQUIRE(o->out_dir);
  return guarded([&] { convqr::run_synth(to_synth(*o), o->out_dir); });
}

void cqr_index_options_init(cqr_index_options* o) {
  if (!o) return;
  *o = cqr_index_options{};
  o->retriever = "bm25";
  o->dense_dim = convqr::kDefaultDenseDim;
}

cqr_status cqr_index(const cqr_index_options* o) {
  CQR_REQUIRE(o);
  return guarded([&] {
    convqr::run_index({str(o->passages), str(o->out), o->retriever ? o->retriever : "bm25", o->dense_dim});
  });
}

void cqr_weaklabel_options_init(cqr_weaklabel_options* o) {
  if (!o) return;
  const convqr::WeakLabelOptions d;
  *o = cqr_weaklabel_options{};
  o->pool_size = d.pool_size;
  o->source = "auto";
  o->seed = d.seed;
  o->replace_first = d.replace_first ? 1 : 0;
}

cqr_status cqr_weaklabel(const cqr_weaklabel_options* o, cqr_weaklabel_stats* stats) {
  CQR_REQUIRE(o);
  return guarded([&] { fill_stats(convqr::run_weaklabel(to_weaklabel(*o)), stats); });
}

void cqr_train_options_init(cqr_train_options* o) {
  if (!o) return;
  const convqr::TrainOptions d;
  const auto& c = d.config;
  *o = cqr_train_options{};
  o->init = "plain";
  o->optimizer = "adam";
  o->dev_fraction = d.dev_fraction;
  o->replace_first = d.replace_first ? 1 : 0;
  o->alpha = c.alpha;
  o->m = c.m;
  o->batch_size = c.batch_size;
  o->steps = c.steps;
  o->learning_rate = c.learning_rate;
  o->warmup_steps = -1;
  o->seed = c.seed;
  o->ce_mask_fraction = c.ce_mask_fraction;
  o->eval_every = c.eval_every;
  o->threshold = c.threshold;
  o->ce_pretrain_steps = c.ce_pretrain_steps;
  o->ce_pretrain_lr = c.ce_pretrain_lr;
}

cqr_status cqr_train(const cqr_train_options* o, cqr_train_summary* summary) {
  CQR_REQUIRE(o);
  return guarded([&] { fill_summary(convqr::run_train(to_train(*o)), summary); });
}

void cqr_rewrite_options_init(cqr_rewrite_options* o) {
  if (!o) return;
  *o = cqr_rewrite_options{};
  o->source = "policy";
  o->mode = "greedy";
}

cqr_status cqr_rewrite(const cqr_rewrite_options* o, size_t* n_written) {
  CQR_REQUIRE(o);
  return guarded([&] {
    convqr::RewriteOptions r;
    r.dialogues = str(o->dialogues);
    r.passages = str(o->passages);
    r.checkpoint = str(o->checkpoint);
    r.out = str(o->out);
    r.source = o->source ? o->source : "policy";
    r.mode = o->mode ? o->mode : "greedy";
    r.target_len = o->target_len;
    r.replace_first = o->replace_first != 0;
    const auto records = convqr::run_rewrite(r);
    if (n_written) *n_written = records.size();
  });
}

void cqr_retrieve_options_init(cqr_retrieve_options* o) {
  if (!o) return;
  *o = cqr_retrieve_options{};
  o->k = 100;
}

cqr_status cqr_retrieve(const cqr_retrieve_options* o, size_t* n_queries) {
  CQR_REQUIRE(o);
  return guarded([&] {
    const auto run = convqr::run_retrieve({str(o->queries), str(o->index), str(o->out), o->k, str(o->tag)});
    if (n_queries) *n_queries = run.queries.size();
  });
}

void cqr_eval_options_init(cqr_eval_options* o) {
  if (!o) return;
  *o = cqr_eval_options{};
  o->mode = "updated";
  o->ks[0] = 10;
  o->ks[1] = 100;
  o->n_ks = 2;
}

cqr_status cqr_eval(const cqr_eval_options* o, cqr_metrics* overall, char** table) {
  CQR_REQUIRE(o);
  if (o->n_ks > CQR_MAX_KS) return fail(CQR_ERR_ARGUMENT, "too many cutoffs");
  if (table) *table = nullptr;
  return guarded([&] {
    convqr::EvalOptions e;
    e.run = str(o->run);
    e.qrels = str(o->qrels);
    e.dialogues = str(o->dialogues);
    e.out = str(o->out);
    e.mode = o->mode ? o->mode : "updated";
    e.ks.assign(o->ks, o->ks + o->n_ks);
    const auto report = convqr::run_eval(e);
    fill_metrics(report.overall, overall);
    if (table) *table = dup(convqr::format_report_table(report));
  });
}

void cqr_analyze_options_init(cqr_analyze_options* o) {
  if (!o) return;
  *o = cqr_analyze_options{};
  o->mode = "updated";
}

cqr_status cqr_analyze(const cqr_analyze_options* o, char** table) {
  CQR_REQUIRE(o);
  if (table) *table = nullptr;
  return guarded([&] {
    convqr::AnalyzeOptions a;
    a.dialogues = str(o->dialogues);
    a.passages = str(o->passages);
    a.qrels = str(o->qrels);
    a.run = str(o->run);
    a.split = str(o->split);
    a.stats = str(o->stats);
    a.out = str(o->out);
    a.mode = o->mode ? o->mode : "updated";
    const auto report = convqr::run_analyze(a);
    if (table) *table = dup(report.table);
  });
}

void cqr_pipeline_options_init(cqr_pipeline_options* o) {
  if (!o) return;
  *o = cqr_pipeline_options{};
  o->retriever = "bm25";
  o->dense_dim = convqr::kDefaultDenseDim;
  o->eval_mode = "updated";
  cqr_synth_options_init(&o->synth);
  cqr_weaklabel_options_init(&o->weaklabel);
  cqr_train_options_init(&o->train);
}

cqr_status cqr_pipeline(const cqr_pipeline_options* o, cqr_pipeline_summary* summary) {
  CQR_REQUIRE(o);
  CQR_REQUIRE(o->out_dir);
  return guarded([&] {
    convqr::PipelineOptions p;
    p.out_dir = o->out_dir;
    p.synth = to_synth(o->synth);
    p.retriever = o->retriever ? o->retriever : "bm25";
    p.dense_dim = o->dense_dim;
    p.weaklabel = to_weaklabel(o->weaklabel);
    p.train = to_train(o->train);
    p.eval_mode = o->eval_mode ? o->eval_mode : "updated";
    const auto r = convqr::run_pipeline(p);
    if (!summary) return;
    *summary = cqr_pipeline_summary{};
    fill_summary(r.train, &summary->train);
    fill_stats(r.labeling, &summary->labeling);
    fill_metrics(r.policy.overall, &summary->policy);
    fill_metrics(r.zero_policy.overall, &summary->zero_policy);
    fill_metrics(r.question_only.overall, &summary->question_only);
    fill_metrics(r.human_rewrite.overall, &summary->human_rewrite);
  });
}

}  // extern "C"
