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


// Acceptance checks A1..A10. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Usage: convqr_acceptance [work_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "convqr/error.hpp"
#include "convqr/pipeline.hpp"
#include "oracles.hpp"

using namespace convqr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- A1 -------------------------------------------------------------------

Outcome oracle_ranking() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthConfig c;
  c.n_entities = 120;
  c.n_dialogues = 1;
  c.n_test_dialogues = 1;
  const auto corpus = generate_benchmark(c).corpus;
  const auto bm25 = Bm25Index::build(corpus);
  const auto dense = DenseIndex::build(corpus, kDefaultDenseDim);
  const oracle::Bm25 ref_bm25(corpus);
  const oracle::Dense ref_dense(corpus, kDefaultDenseDim);

  std::vector<std::string> vocab;
  for (const auto& [t, df] : ref_bm25.df()) vocab.push_back(t);
  std::mt19937_64 gen(2026);
  std::size_t mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    std::string q;
    for (int j = 1 + gen() % 6; j > 0; --j) q += vocab[gen() % vocab.size()] + " ";
    if (i % 7 == 0) q += "Qwzx";
    const std::size_t k = 1 + gen() % 100;
    if (bm25.retrieve(q, k) != oracle::exhaustive_top_k(ref_bm25, q, k)) ++mismatches;
    if (dense.retrieve(q, k) != oracle::exhaustive_top_k(ref_dense, q, k)) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0 && corpus.size() <= 1000,
          fmt("%zu passages, 200 queries x 2 retrievers, %zu mismatches, %.2fs", corpus.size(), mismatches,
              secs)};
}

// ---- A2 -------------------------------------------------------------------

PolicyInput random_input(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t rows = 1 + gen() % 15;
  PolicyInput in;
  in.question = "what about it";
  in.question_tokens = text::tokenize(in.question);
  in.features = FeatureMatrix(rows, kFeatureDim);
  for (std::size_t r = 0; r < rows; ++r) {
    in.candidates.push_back("t" + std::to_string(r));
    auto row = in.features.row(r);
    row[kBias] = 1.0;
    for (std::size_t k = 1; k < kFeatureDim; ++k) row[k] = u(gen) < 0.3 ? 0.0 : u(gen);
  }
  return in;
}

PolicyParams random_params(std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  PolicyParams p = PolicyParams::zeros();
  for (double& w : p.w) w = n(gen);
  return p;
}

std::vector<std::uint8_t> random_decisions(std::mt19937_64& gen, std::size_t n) {
  std::vector<std::uint8_t> d(n);
  for (auto& x : d) x = gen() & 1;
  return d;
}

Outcome gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(17);
  double worst[3] = {0, 0, 0};
  for (int i = 0; i < 100; ++i) {
    const auto in = random_input(gen);
    const auto p = random_params(gen);
    const auto d = random_decisions(gen, in.features.rows());
    const auto num = oracle::numeric_grad(
        [&](const std::vector<double>& w) { return decisions_logprob({w}, in, d); }, p.w);
    worst[0] = std::max(worst[0], oracle::relative_error(logprob_grad(p, in, d), num));
  }
  for (int i = 0; i < 100; ++i) {
    const auto in = random_input(gen);
    const auto p = random_params(gen);
    std::string rewrite = in.question;
    for (const auto& c : in.candidates)
      if (gen() % 2) rewrite += " " + c;
    const auto num = oracle::numeric_grad(
        [&](const std::vector<double>& w) { return ce_loss_and_grad({w}, in, rewrite).loss; }, p.w);
    worst[1] = std::max(worst[1], oracle::relative_error(ce_loss_and_grad(p, in, rewrite).grad, num));
  }
  for (int i = 0; i < 100; ++i) {
    // A batch of examples with frozen sampled decisions and rewards.
    const std::size_t b = 1 + gen() % 4, m = 1 + gen() % 5;
    std::vector<TrainExample> examples(b);
    std::vector<const TrainExample*> batch;
    std::vector<Rollout> rollouts(b);
    const auto p = random_params(gen);
    for (std::size_t j = 0; j < b; ++j) {
      examples[j].input = random_input(gen);
      batch.push_back(&examples[j]);
      for (std::size_t s = 0; s < m; ++s) {
        rollouts[j].samples.push_back(
            make_rewrite(p, examples[j].input, random_decisions(gen, examples[j].input.features.rows())));
        rollouts[j].rewards.push_back(static_cast<int>(gen() % 3) - 1);
      }
    }
    const auto num = oracle::numeric_grad(
        [&](const std::vector<double>& w) { return rl_surrogate({w}, batch, rollouts).loss; }, p.w);
    worst[2] = std::max(worst[2], oracle::relative_error(rl_surrogate(p, batch, rollouts).grad, num));
  }
  const double secs = seconds_since(t0);
  const bool ok = worst[0] < 1e-5 && worst[1] < 1e-5 && worst[2] < 1e-5 && secs < 30.0;
  return {ok, fmt("max relative error logprob %.2e, ce %.2e, rl %.2e over 100 instances each, %.2fs", worst[0],
                  worst[1], worst[2], secs)};
}

// ---- pipeline runs shared by A3, A4, A6, A7, A9, A10 ------------------------

struct Run {
  PipelineResult result;
  double seconds = 0.0;
  fs::path dir;
};

PipelineOptions default_options(const fs::path& dir, const std::string& retriever) {
  PipelineOptions o;
  o.out_dir = dir.string();
  o.retriever = retriever;
  o.train.config.alpha = 1.0;
  return o;
}

Run run(const PipelineOptions& o) {
  fs::remove_all(o.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  Run r;
  r.result = run_pipeline(o);
  r.seconds = seconds_since(t0);
  r.dir = o.out_dir;
  return r;
}

Outcome relative_gain(const Run& r, double bound) {
  const double p = r.result.policy.overall.mrr;
  const double z = r.result.zero_policy.overall.mrr;
  const double q = r.result.question_only.overall.mrr;
  const bool ok = p >= (1.0 + bound) * z && p >= (1.0 + bound) * q;
  return {ok, fmt("MRR policy %.4f, w=0 %.4f (%+.1f%%), question-only %.4f (%+.1f%%), need >= +%.0f%%; "
                  "dev accuracy %.3f -> %.3f; %.1fs",
                  p, z, 100.0 * (p / z - 1.0), q, 100.0 * (p / q - 1.0), 100.0 * bound,
                  r.result.train.initial_dev_accuracy, r.result.train.result.state.best_dev_accuracy,
                  r.seconds)};
}

Outcome rl_gain(const Run& r) {
  auto out = relative_gain(r, 0.30);
  out.pass = out.pass && r.seconds < 600.0;
  return out;
}

// ---- A5 -------------------------------------------------------------------

Outcome weak_label_fidelity() {
  // Exhaustive agreement on a 200-passage corpus.
  SynthConfig c;
  c.n_entities = 25;
  c.n_dialogues = 40;
  c.n_test_dialogues = 1;
  const auto small = generate_benchmark(c);
  if (small.corpus.size() != 200) return {false, "unexpected corpus size"};
  const auto index = Bm25Index::build(small.corpus);
  const WeakLabeler labeler(small.corpus, index);
  std::vector<text::TokenSeq> docs;
  for (const auto& p : small.corpus.passages()) docs.push_back(analyze(p.text, kMaxPassageTokens));
  LabelingOptions full;
  full.pool_size = small.corpus.size();
  const auto examples = explode_all(small.train, false);
  const auto labels = labeler.label_all(examples, full);
  std::size_t disagree = 0, tied_examples = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto answer = text::content_tokens(examples[i].answer);
    double best = -1.0;
    std::vector<DocIndex> argmax;
    for (DocIndex d = 0; d < docs.size(); ++d) {
      const double f = oracle::best_span(docs[d], answer).f1;
      if (f > best) {
        best = f;
        argmax.assign(1, d);
      } else if (f == best) {
        argmax.push_back(d);
      }
    }
    tied_examples += argmax.size() > 1;
    const bool in_set = std::find(argmax.begin(), argmax.end(), labels[i].positive) != argmax.end();
    if (labels[i].f1 != best || !in_set) ++disagree;
  }

  // Gold recovery under the default configuration.
  const auto bench = generate_benchmark(SynthConfig{});
  const auto big_index = Bm25Index::build(bench.corpus);
  const WeakLabeler big(bench.corpus, big_index);
  const auto all = explode_all(bench.train, false);
  auto recovered = [&](const LabelingOptions& opt) {
    const auto l = big.label_all(all, opt);
    std::size_t hit = 0, with_gold = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (all[i].gold.empty()) continue;
      ++with_gold;
      const auto& id = bench.corpus[l[i].positive].id;
      hit += std::find(all[i].gold.begin(), all[i].gold.end(), id) != all[i].gold.end();
    }
    return static_cast<double>(hit) / static_cast<double>(with_gold);
  };
  const double def = recovered({});
  LabelingOptions ctx;
  ctx.source = QuerySource::dialogue_context;
  const double from_context = recovered(ctx);
  return {disagree == 0 && def >= 0.9,
          fmt("%zu/%zu disagree with brute force (%zu with ties); gold recovered %.1f%% default, %.1f%% "
              "from dialogue context",
              disagree, examples.size(), tied_examples, 100.0 * def, 100.0 * from_context)};
}

// ---- A6 -------------------------------------------------------------------

Outcome evaluation_semantics(const Run& r) {
  // Hand-computed three-example fixture.
  auto q = [](const std::string& id, std::vector<std::string> ranked) {
    RunQuery out{id, id, {}};
    for (std::size_t i = 0; i < ranked.size(); ++i) out.ranked.push_back({ranked[i], i + 1, 1.0 / (i + 1)});
    return out;
  };
  RunFile fx{"fixture", {q("a_1", {"p1", "p2", "p3"}), q("a_2", {"p4", "p5"}), q("a_3", {"p6"})}};
  const Qrels fq = {{"a_1", {"p2"}}, {"a_2", {"p4", "p9"}}, {"a_3", {}}};
  const std::size_t ks[] = {1, 3};
  const auto fu = evaluate(fx, fq, EvalMode::updated, ks).overall;
  const auto fo = evaluate(fx, fq, EvalMode::original, ks).overall;
  const bool fixture_ok = fu.mrr == 0.75 && fu.recall[0].second == 0.25 && fu.recall[1].second == 0.75 &&
                          fo.mrr == 0.5 && fo.recall[0].second == 0.5 / 3 && fo.recall[1].second == 0.5 &&
                          fu.n_total == 3 && fu.n_valid == 2;

  // Scaling on the pipeline's runs, with a third of the gold removed.
  auto qrels = load_qrels((r.dir / "data/qrels.txt").string());
  std::mt19937_64 gen(5);
  for (auto& [id, gold] : qrels)
    if (gen() % 3 == 0) gold.clear();
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& entry : fs::directory_iterator(r.dir / "runs")) {
    const auto run = load_run(entry.path().string());
    const auto o = evaluate(run, qrels, EvalMode::original).overall;
    const auto u = evaluate(run, qrels, EvalMode::updated).overall;
    const double nt = static_cast<double>(o.n_total), nv = static_cast<double>(o.n_valid);
    worst = std::max(worst, std::abs(o.mrr * nt - u.mrr * nv));
    for (std::size_t i = 0; i < o.recall.size(); ++i)
      worst = std::max(worst, std::abs(o.recall[i].second * nt - u.recall[i].second * nv));
    ++checked;
  }
  return {fixture_ok && worst <= 1e-12 && checked > 0,
          fmt("fixture %s; %zu runs, max |orig*n_total - upd*n_valid| = %.2e over MRR, R@10, R@100",
              fixture_ok ? "exact" : "WRONG", checked, worst)};
}

// ---- A7, A8 ---------------------------------------------------------------

struct SmallSetup {
  SynthBenchmark bench;
  std::unique_ptr<Bm25Index> index;
  std::vector<TrainExample> examples;
  std::vector<const TrainExample*> batch;
  CandidatePool pool;

  SmallSetup() {
    SynthConfig c;
    c.n_entities = 12;
    c.n_dialogues = 20;
    c.n_test_dialogues = 1;
    bench = generate_benchmark(c);
    index = std::make_unique<Bm25Index>(Bm25Index::build(bench.corpus));
    const auto records = explode_all(bench.train, false);
    auto labels = WeakLabeler(bench.corpus, *index).label_all(records, {});
    examples = make_train_examples(records, labels, corpus_idf(bench.corpus), 1.0, 7);
    std::vector<WeakLabel> batch_labels;
    for (std::size_t i = 0; i < 16; ++i) {
      batch.push_back(&examples[i]);
      batch_labels.push_back(labels[i]);
    }
    pool = build_candidate_pool(batch_labels);
  }
};

Outcome self_critical(const Run& r, const SmallSetup& s) {
  const auto& stats = r.result.train.result.stats;
  bool per_step = true;
  for (const auto& m : r.result.train.result.metrics)
    per_step = per_step && m.mean_reward >= -1.0 && m.mean_reward <= 1.0;

  PolicyParams saturated = PolicyParams::zeros();
  saturated.w[kBias] = -60.0;
  const auto res = rl_loss_and_grad(saturated, s.batch, s.pool, *s.index, 5, 0.5, 11);
  bool all_greedy = true;
  for (const auto& ro : res.rollouts)
    for (const auto& smp : ro.samples) all_greedy = all_greedy && smp.decisions == ro.greedy.decisions;
  const bool zero = std::all_of(res.value.grad.begin(), res.value.grad.end(), [](double g) { return g == 0.0; });
  const bool ok = stats.rewards.out_of_range == 0 && stats.rewards.total() > 0 && per_step && all_greedy && zero;
  return {ok, fmt("A3 rewards: %zu x -1, %zu x 0, %zu x +1, %zu out of range over %zu steps; "
                  "all-greedy fixture gradient %s",
                  stats.rewards.by_value[0], stats.rewards.by_value[1], stats.rewards.by_value[2],
                  stats.rewards.out_of_range, r.result.train.result.state.step,
                  all_greedy && zero ? "exactly zero" : "NONZERO")};
}

Outcome mixed_linearity(const SmallSetup& s) {
  std::mt19937_64 gen(3);
  const auto p = random_params(gen);
  auto at = [&](double alpha) { return mixed_loss_and_grad(p, s.batch, s.pool, *s.index, alpha, 5, 0.5, 21); };
  const auto l0 = at(0.0), lh = at(0.5), l1 = at(1.0);
  const double gap = std::abs(lh.loss - (0.5 * l0.loss + 0.5 * l1.loss));
  const bool nontrivial = l0.loss != 0.0 && l1.loss != 0.0;
  return {gap <= 1e-10 && nontrivial,
          fmt("L(0)=%.6f L(1)=%.6f L(0.5)=%.6f, gap %.2e", l0.loss, l1.loss, lh.loss, gap)};
}

// ---- A9 -------------------------------------------------------------------

Outcome zero_supervision(const Run& r) {
  auto out = relative_gain(r, 0.20);
  const auto& t = r.result.train;
  const bool none = t.result.stats.rewrites_consumed == 0 && t.rewrites_attached == 0 &&
                    r.result.labeling.rewrites_read == 0;
  out.pass = out.pass && none;
  out.detail += fmt("; human rewrites consumed %zu, attached %zu, read by labeler %zu", t.result.stats.rewrites_consumed,
                    t.rewrites_attached, r.result.labeling.rewrites_read);
  return out;
}

// ---- A10 ------------------------------------------------------------------

std::map<std::string, std::string> artifacts(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path().string());
  return files;
}

Outcome determinism(const Run& a, const Run& b) {
  const auto fa = artifacts(a.dir), fb = artifacts(b.dir);
  std::size_t differ = fa.size() == fb.size() ? 0 : 1;
  std::string first;
  for (const auto& [name, content] : fa) {
    auto it = fb.find(name);
    if (it == fb.end() || it->second != content) {
      ++differ;
      if (first.empty()) first = name;
    }
  }
  for (const char* must : {"train/policy.ckpt", "runs/policy.run", "reports/policy.jsonl"})
    if (!fa.count(must)) ++differ;
  return {differ == 0, fmt("%zu artifacts compared (checkpoint, runs, reports, labels, analysis), %zu differ%s%s",
                           fa.size(), differ, first.empty() ? "" : ", first: ", first.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "convqr_acceptance";
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](const char* id, const char* what, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", what, o.detail.c_str());
    std::fflush(stdout);
  };

  report("A1", "oracle ranking", oracle_ranking);
  report("A2", "gradient checks", gradient_checks);

  std::optional<Run> bm25, dense, zero, repeat;
  auto guarded_run = [&](std::optional<Run>& slot, const PipelineOptions& o) {
    try {
      slot = run(o);
    } catch (const std::exception& e) {
      std::printf("pipeline %s failed: %s\n", o.out_dir.c_str(), e.what());
    }
  };
  guarded_run(bm25, default_options(work / "bm25", "bm25"));
  guarded_run(dense, default_options(work / "dense", "dense"));
  auto zs = default_options(work / "zero_supervision", "bm25");
  zs.weaklabel.source = "dialogue_context";
  zs.train.config.ce_mask_fraction = 0.0;
  guarded_run(zero, zs);
  guarded_run(repeat, default_options(work / "bm25_repeat", "bm25"));

  auto need = [](const std::optional<Run>& r) -> const Run& {
    if (!r) throw RuntimeError("pipeline run unavailable");
    return *r;
  };
  const SmallSetup small;

  report("A3", "RL gain with BM25", [&] { return rl_gain(need(bm25)); });
  report("A4", "RL gain with dense", [&] { return rl_gain(need(dense)); });
  report("A5", "weak-label fidelity", weak_label_fidelity);
  report("A6", "evaluation semantics", [&] { return evaluation_semantics(need(bm25)); });
  report("A7", "self-critical sanity", [&] { return self_critical(need(bm25), small); });
  report("A8", "mixed-loss linearity", [&] { return mixed_linearity(small); });
  report("A9", "zero supervision", [&] { return zero_supervision(need(zero)); });
  report("A10", "determinism", [&] { return determinism(need(bm25), need(repeat)); });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
