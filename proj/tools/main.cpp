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


// convqr command line: synth | index | weaklabel | train | rewrite |
// retrieve | eval | analyze | pipeline.
//
// Relative paths resolve against --data-dir (default $CONVQR_DATA_DIR, else
// the working directory). Every flag can also come from a TOML file given
// with --config; flags on the command line win and unknown keys are errors.
// Exit status: 0 success, 2 invalid input, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "convqr/convqr.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

int exit_code(cqr_status s) {
  switch (s) {
    case CQR_OK: return kExitOk;
    case CQR_ERR_ARGUMENT:
    case CQR_ERR_VALIDATION: return kExitValidation;
    case CQR_ERR_RUNTIME:
    case CQR_ERR_IO: break;
  }
  return kExitRuntime;
}

struct Context {
  CLI::App* root = nullptr;
  std::string data_dir;

  std::string path(const std::string& p) const {
    if (p.empty() || data_dir.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(data_dir) / p).string();
  }

  const char* c(const std::string& s) const { return s.empty() ? nullptr : s.c_str(); }

  // Writes the resolved configuration next to the command's outputs.
  cqr_status echo(const std::string& dir, const std::string& command) const {
    const std::string target = (fs::path(dir.empty() ? "." : dir) / ("convqr." + command + ".toml")).string();
    const CLI::App* sub = root->get_subcommand(command);
    const std::string text = "data-dir=\"" + data_dir + "\"\n[" + command + "]\n" + sub->config_to_str(true, false);
    return cqr_write_text_file(target.c_str(), text.c_str());
  }
};

std::string parent_dir(const std::string& file) {
  const auto p = fs::path(file).parent_path();
  return p.empty() ? std::string(".") : p.string();
}

int report(cqr_status s) {
  const char* detail = cqr_last_error();
  if (s != CQR_OK && detail && *detail)
    std::fprintf(stderr, "convqr: %s: %s\n", cqr_status_string(s), detail);
  return exit_code(s);
}

// ---- option holders ---------------------------------------------------------

struct SynthFlags {
  std::string out;
  cqr_synth_options o{};
  SynthFlags() { cqr_synth_options_init(&o); }

  void add(CLI::App* app) {
    app->add_option("--entities", o.entities, "Number of entities")->capture_default_str();
    app->add_option("--facts", o.facts, "Attributes (passages) per entity")->capture_default_str();
    app->add_option("--dialogues", o.dialogues, "Training dialogues")->capture_default_str();
    app->add_option("--test-dialogues", o.test_dialogues, "Test dialogues")->capture_default_str();
    app->add_option("--turns", o.turns, "Questions per dialogue")->capture_default_str();
    app->add_option("--shift-prob", o.shift_prob, "Topic shift probability")->capture_default_str();
    app->add_option("--pronoun-prob", o.pronoun_prob, "Pronoun follow-up probability")->capture_default_str();
    app->add_option("--nogold-prob", o.nogold_prob, "Probability a test turn has no gold")->capture_default_str();
    app->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  }
};

struct WeakLabelFlags {
  std::string source = "auto";
  cqr_weaklabel_options o{};
  WeakLabelFlags() { cqr_weaklabel_options_init(&o); }

  void add(CLI::App* app, bool with_seed) {
    app->add_option("--pool-size", o.pool_size, "BM25 pre-filter depth")->capture_default_str();
    app->add_option("--source", source, "Pre-filter query: auto|human_rewrite|dialogue_context")
        ->capture_default_str();
    if (with_seed) app->add_option("--seed", o.seed, "Tie-break and negative sampling seed")->capture_default_str();
  }
};

struct TrainFlags {
  std::string init = "plain";
  std::string init_checkpoint;
  std::string optimizer = "adam";
  std::size_t top_k = 20;  // accepted for compatibility, unused
  cqr_train_options o{};
  TrainFlags() { cqr_train_options_init(&o); }

  // The pipeline already has a --seed for the benchmark, so its training
  // seed is --train-seed.
  void add(CLI::App* app, const std::string& seed_flag) {
    auto name = [](const char* n) { return std::string("--") + n; };
    app->add_option(name("init"), init, "Initialization: plain|ce-pretrained|checkpoint")->capture_default_str();
    app->add_option(name("init-checkpoint"), init_checkpoint, "Checkpoint for --init checkpoint");
    app->add_option(name("optimizer"), optimizer, "adam|sgd")->capture_default_str();
    app->add_option(name("dev-fraction"), o.dev_fraction, "Share of dialogues held out for dev")
        ->capture_default_str();
    app->add_option(name("alpha"), o.alpha, "Weight of the RL term")->capture_default_str();
    app->add_option(name("m"), o.m, "Sampled rewrites per example")->capture_default_str();
    app->add_option(name("batch-size"), o.batch_size, "Examples per step")->capture_default_str();
    app->add_option(name("steps"), o.steps, "Training steps")->capture_default_str();
    app->add_option(name("lr"), o.learning_rate, "Peak learning rate")->capture_default_str();
    app->add_option(name("warmup"), o.warmup_steps, "Warmup steps (negative: 10% of steps)")
        ->capture_default_str();
    app->add_option(seed_flag, o.seed, "Training seed")->capture_default_str();
    app->add_option(name("ce-mask-fraction"), o.ce_mask_fraction, "Share of human rewrites used")
        ->capture_default_str();
    app->add_option(name("eval-every"), o.eval_every, "Dev evaluation interval")->capture_default_str();
    app->add_option(name("threshold"), o.threshold, "Greedy inclusion threshold")->capture_default_str();
    app->add_option(name("top-k"), top_k, "Sampling top-k (no effect on token selection)")
        ->capture_default_str();
    app->add_option(name("ce-pretrain-steps"), o.ce_pretrain_steps, "Steps of --init ce warm-up")
        ->capture_default_str();
    app->add_option(name("ce-pretrain-lr"), o.ce_pretrain_lr, "Learning rate of --init ce warm-up")
        ->capture_default_str();
  }

  void finish() {
    o.init = init.c_str();
    o.init_checkpoint = init_checkpoint.empty() ? nullptr : init_checkpoint.c_str();
    o.optimizer = optimizer.c_str();
  }
};

// Resolves the reward retriever for `train`: checks a given index against
// --retriever, or builds one under the output directory.
cqr_status train_index(const std::string& passages, const std::string& out_dir, const std::string& kind,
                       std::string& index) {
  if (index.empty()) {
    if (kind.empty()) {
      std::fprintf(stderr, "convqr: train needs --index or --retriever\n");
      return CQR_ERR_VALIDATION;
    }
    index = (fs::path(out_dir) / ("index." + kind)).string();
    cqr_index_options o;
    cqr_index_options_init(&o);
    o.passages = passages.c_str();
    o.out = index.c_str();
    o.retriever = kind.c_str();
    return cqr_index(&o);
  }
  if (kind.empty()) return CQR_OK;
  cqr_retriever* r = nullptr;
  cqr_status s = cqr_retriever_load(index.c_str(), &r);
  if (s != CQR_OK) return s;
  const bool same = kind == cqr_retriever_kind(r);
  if (!same)
    std::fprintf(stderr, "convqr: --retriever %s but %s is a %s index\n", kind.c_str(), index.c_str(),
                 cqr_retriever_kind(r));
  cqr_retriever_free(r);
  return same ? CQR_OK : CQR_ERR_VALIDATION;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convqr: conversational query rewriting trained against a retriever"};
  app.set_version_flag("--version", std::string(cqr_version()));
  app.allow_config_extras(false);
  app.set_config("--config", "", "TOML file with flag values");
  Context ctx;
  ctx.root = &app;
  app.add_option("--data-dir", ctx.data_dir, "Base directory for relative paths")->envname("CONVQR_DATA_DIR");
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark");
  SynthFlags sf;
  sf.add(synth);
  synth->add_option("--out", sf.out, "Output directory")->required();

  // index
  auto* index = app.add_subcommand("index", "Build a retrieval index");
  std::string ix_passages, ix_out, ix_kind = "bm25";
  std::size_t ix_dim = 256;
  index->add_option("--passages", ix_passages, "passages.jsonl")->required();
  index->add_option("--retriever", ix_kind, "bm25|dense")->capture_default_str();
  index->add_option("--dense-dim", ix_dim, "Dense vector size")->capture_default_str();
  index->add_option("--out", ix_out, "Index file")->required();

  // weaklabel
  auto* weak = app.add_subcommand("weaklabel", "Assign positive and hard-negative passages");
  std::string wl_dialogues, wl_passages, wl_out;
  bool wl_replace = false;
  WeakLabelFlags wf;
  weak->add_option("--dialogues", wl_dialogues, "dialogues.jsonl")->required();
  weak->add_option("--passages", wl_passages, "passages.jsonl")->required();
  weak->add_option("--out", wl_out, "labels.jsonl")->required();
  weak->add_flag("--replace-first", wl_replace, "Replace first questions with their rewrites");
  wf.add(weak, true);

  // train
  auto* train = app.add_subcommand("train", "Train the rewriting policy");
  std::string tr_dialogues, tr_passages, tr_labels, tr_index, tr_out;
  bool tr_replace = false;
  TrainFlags tf;
  train->add_option("--dialogues", tr_dialogues, "dialogues.jsonl")->required();
  train->add_option("--passages", tr_passages, "passages.jsonl")->required();
  train->add_option("--labels", tr_labels, "labels.jsonl")->required();
  train->add_option("--index", tr_index, "Index used for rewards");
  train->add_option("--out", tr_out, "Output directory")->required();
  train->add_flag("--replace-first", tr_replace, "Replace first questions with their rewrites");
  std::string tr_kind;
  train->add_option("--retriever", tr_kind, "bm25|dense; builds the index when --index is absent");
  tf.add(train, "--seed");

  // rewrite
  auto* rewrite = app.add_subcommand("rewrite", "Rewrite questions");
  std::string rw_dialogues, rw_passages, rw_ckpt, rw_out, rw_source = "policy", rw_mode = "greedy";
  std::size_t rw_target = 0;
  bool rw_replace = false;
  rewrite->add_option("--dialogues", rw_dialogues, "dialogues.jsonl")->required();
  rewrite->add_option("--passages", rw_passages, "passages.jsonl (policy source)");
  rewrite->add_option("--checkpoint", rw_ckpt, "Policy checkpoint (policy source)");
  rewrite->add_option("--out", rw_out, "rewrites.jsonl")->required();
  rewrite->add_option("--source", rw_source, "policy|question-only|dialogue-context|human-rewrite")
      ->capture_default_str();
  rewrite->add_option("--mode", rw_mode, "greedy|brevity")->capture_default_str();
  rewrite->add_option("--target-len", rw_target, "Token budget for brevity decoding");
  rewrite->add_flag("--replace-first", rw_replace, "Replace first questions with their rewrites");

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "Retrieve passages for rewrites");
  std::string rt_queries, rt_index, rt_out, rt_tag;
  std::size_t rt_k = 100;
  retrieve->add_option("--queries", rt_queries, "rewrites.jsonl")->required();
  retrieve->add_option("--index", rt_index, "Index file")->required();
  retrieve->add_option("--out", rt_out, "Run file")->required();
  retrieve->add_option("--k", rt_k, "Results per query")->capture_default_str();
  retrieve->add_option("--tag", rt_tag, "Run tag (default: rewrite source)");

  // eval
  auto* eval = app.add_subcommand("eval", "Score a run against qrels");
  std::string ev_run, ev_qrels, ev_dialogues, ev_out, ev_mode = "updated";
  std::vector<std::size_t> ev_ks = {10, 100};
  eval->add_option("--run", ev_run, "Run file")->required();
  eval->add_option("--qrels", ev_qrels, "qrels file")->required();
  eval->add_option("--dialogues", ev_dialogues, "dialogues.jsonl for subset tags");
  eval->add_option("--out", ev_out, "Report (JSONL)");
  eval->add_option("--mode", ev_mode, "original|updated")->capture_default_str();
  eval->add_option("--k", ev_ks, "Recall cutoffs")->delimiter(',')->capture_default_str();

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Topic/length breakdowns and rewrite statistics");
  std::string an_dialogues, an_passages, an_qrels, an_run, an_split, an_stats, an_out, an_mode = "updated";
  analyze->add_option("--dialogues", an_dialogues, "dialogues.jsonl")->required();
  analyze->add_option("--passages", an_passages, "passages.jsonl");
  analyze->add_option("--qrels", an_qrels, "qrels file");
  analyze->add_option("--run", an_run, "Run file to break down");
  analyze->add_option("--split", an_split, "topic|length");
  analyze->add_option("--stats", an_stats, "rewrites.jsonl to summarize");
  analyze->add_option("--out", an_out, "Report (JSONL)");
  analyze->add_option("--mode", an_mode, "original|updated")->capture_default_str();

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage on a fresh synthetic benchmark");
  std::string pl_out, pl_kind = "bm25", pl_mode = "updated";
  std::size_t pl_dim = 256;
  SynthFlags pl_synth;
  WeakLabelFlags pl_weak;
  TrainFlags pl_train;
  pipeline->add_option("--out", pl_out, "Output directory")->required();
  pipeline->add_option("--retriever", pl_kind, "bm25|dense")->capture_default_str();
  pipeline->add_option("--dense-dim", pl_dim, "Dense vector size")->capture_default_str();
  pipeline->add_option("--eval-mode", pl_mode, "original|updated")->capture_default_str();
  pl_synth.add(pipeline);
  pl_weak.add(pipeline, false);
  pl_train.add(pipeline, "--train-seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  cqr_status s = CQR_OK;
  if (*synth) {
    const std::string out = ctx.path(sf.out);
    sf.o.out_dir = out.c_str();
    s = cqr_synth(&sf.o);
    if (s == CQR_OK) s = ctx.echo(out, "synth");
  } else if (*index) {
    cqr_index_options o;
    cqr_index_options_init(&o);
    const std::string passages = ctx.path(ix_passages), out = ctx.path(ix_out);
    o.passages = passages.c_str();
    o.out = out.c_str();
    o.retriever = ix_kind.c_str();
    o.dense_dim = ix_dim;
    s = cqr_index(&o);
    if (s == CQR_OK) s = ctx.echo(parent_dir(out), "index");
  } else if (*weak) {
    const std::string dialogues = ctx.path(wl_dialogues), passages = ctx.path(wl_passages),
                      out = ctx.path(wl_out);
    wf.o.dialogues = dialogues.c_str();
    wf.o.passages = passages.c_str();
    wf.o.out = out.c_str();
    wf.o.source = wf.source.c_str();
    wf.o.replace_first = wl_replace ? 1 : 0;
    cqr_weaklabel_stats st{};
    s = cqr_weaklabel(&wf.o, &st);
    if (s == CQR_OK) {
      std::printf("labeled %zu  skipped (no answer) %zu  zero overlap %zu  tied %zu  rewrites read %zu\n",
                  st.labeled, st.skipped_no_answer, st.low_signal, st.tied, st.rewrites_read);
      s = ctx.echo(parent_dir(out), "weaklabel");
    }
  } else if (*train) {
    const std::string dialogues = ctx.path(tr_dialogues), passages = ctx.path(tr_passages),
                      labels = ctx.path(tr_labels), out = ctx.path(tr_out);
    std::string idx = ctx.path(tr_index);
    s = train_index(passages, out, tr_kind, idx);
    if (s != CQR_OK) return report(s);
    tf.init_checkpoint = ctx.path(tf.init_checkpoint);
    tf.finish();
    tf.o.dialogues = dialogues.c_str();
    tf.o.passages = passages.c_str();
    tf.o.labels = labels.c_str();
    tf.o.index = idx.c_str();
    tf.o.out_dir = out.c_str();
    tf.o.replace_first = tr_replace ? 1 : 0;
    cqr_train_summary sum{};
    s = cqr_train(&tf.o, &sum);
    if (s == CQR_OK) {
      std::printf("train examples %zu  dev examples %zu  steps %zu\n", sum.train_examples, sum.dev_examples,
                  sum.steps);
      std::printf("dev accuracy %.4f -> %.4f (best step %zu)  human rewrites consumed %zu\n",
                  sum.initial_dev_accuracy, sum.best_dev_accuracy, sum.best_step, sum.rewrites_consumed);
      s = ctx.echo(out, "train");
    }
  } else if (*rewrite) {
    cqr_rewrite_options o;
    cqr_rewrite_options_init(&o);
    const std::string dialogues = ctx.path(rw_dialogues), passages = ctx.path(rw_passages),
                      ckpt = ctx.path(rw_ckpt), out = ctx.path(rw_out);
    o.dialogues = dialogues.c_str();
    o.passages = ctx.c(passages);
    o.checkpoint = ctx.c(ckpt);
    o.out = out.c_str();
    o.source = rw_source.c_str();
    o.mode = rw_mode.c_str();
    o.target_len = rw_target;
    o.replace_first = rw_replace ? 1 : 0;
    std::size_t n = 0;
    s = cqr_rewrite(&o, &n);
    if (s == CQR_OK) {
      std::printf("wrote %zu rewrites\n", n);
      s = ctx.echo(parent_dir(out), "rewrite");
    }
  } else if (*retrieve) {
    cqr_retrieve_options o;
    cqr_retrieve_options_init(&o);
    const std::string queries = ctx.path(rt_queries), idx = ctx.path(rt_index), out = ctx.path(rt_out);
    o.queries = queries.c_str();
    o.index = idx.c_str();
    o.out = out.c_str();
    o.k = rt_k;
    o.tag = ctx.c(rt_tag);
    std::size_t n = 0;
    s = cqr_retrieve(&o, &n);
    if (s == CQR_OK) {
      std::printf("retrieved for %zu queries\n", n);
      s = ctx.echo(parent_dir(out), "retrieve");
    }
  } else if (*eval) {
    cqr_eval_options o;
    cqr_eval_options_init(&o);
    const std::string run = ctx.path(ev_run), qrels = ctx.path(ev_qrels), dialogues = ctx.path(ev_dialogues),
                      out = ctx.path(ev_out);
    if (ev_ks.size() > CQR_MAX_KS) {
      std::fprintf(stderr, "convqr: at most %d cutoffs\n", CQR_MAX_KS);
      return kExitValidation;
    }
    o.run = run.c_str();
    o.qrels = qrels.c_str();
    o.dialogues = ctx.c(dialogues);
    o.out = ctx.c(out);
    o.mode = ev_mode.c_str();
    o.n_ks = ev_ks.size();
    for (std::size_t i = 0; i < ev_ks.size(); ++i) o.ks[i] = ev_ks[i];
    char* table = nullptr;
    s = cqr_eval(&o, nullptr, &table);
    if (s == CQR_OK) {
      std::fputs(table, stdout);
      cqr_string_free(table);
      if (!out.empty()) s = ctx.echo(parent_dir(out), "eval");
    }
  } else if (*analyze) {
    cqr_analyze_options o;
    cqr_analyze_options_init(&o);
    const std::string dialogues = ctx.path(an_dialogues), passages = ctx.path(an_passages),
                      qrels = ctx.path(an_qrels), run = ctx.path(an_run), stats = ctx.path(an_stats),
                      out = ctx.path(an_out);
    o.dialogues = dialogues.c_str();
    o.passages = ctx.c(passages);
    o.qrels = ctx.c(qrels);
    o.run = ctx.c(run);
    o.split = ctx.c(an_split);
    o.stats = ctx.c(stats);
    o.out = ctx.c(out);
    o.mode = an_mode.c_str();
    char* table = nullptr;
    s = cqr_analyze(&o, &table);
    if (s == CQR_OK) {
      std::fputs(table, stdout);
      cqr_string_free(table);
      if (!out.empty()) s = ctx.echo(parent_dir(out), "analyze");
    }
  } else if (*pipeline) {
    cqr_pipeline_options o;
    cqr_pipeline_options_init(&o);
    const std::string out = ctx.path(pl_out);
    pl_train.init_checkpoint = ctx.path(pl_train.init_checkpoint);
    pl_train.finish();
    o.out_dir = out.c_str();
    o.retriever = pl_kind.c_str();
    o.dense_dim = pl_dim;
    o.eval_mode = pl_mode.c_str();
    o.synth = pl_synth.o;
    o.weaklabel = pl_weak.o;
    o.weaklabel.source = pl_weak.source.c_str();
    o.weaklabel.seed = pl_synth.o.seed;
    o.train = pl_train.o;
    cqr_pipeline_summary sum{};
    s = cqr_pipeline(&o, &sum);
    if (s == CQR_OK) {
      std::printf("%-16s %8s %8s %8s\n", "rewriter", "MRR", "R@10", "R@100");
      auto row = [](const char* name, const cqr_metrics& m) {
        std::printf("%-16s %8.4f %8.4f %8.4f\n", name, m.mrr, m.recall[0], m.recall[1]);
      };
      row("policy", sum.policy);
      row("zero-policy", sum.zero_policy);
      row("question-only", sum.question_only);
      row("human-rewrite", sum.human_rewrite);
      std::printf("dev accuracy %.4f -> %.4f  human rewrites consumed %zu\n", sum.train.initial_dev_accuracy,
                  sum.train.best_dev_accuracy, sum.train.rewrites_consumed);
      s = ctx.echo(out, "pipeline");
    }
  }
  return report(s);
}
