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


#include "convqr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "convqr/error.hpp"

namespace convqr {

using ojson = nlohmann::ordered_json;

namespace {

void require(const std::string& value, const char* what) {
  if (value.empty()) throw ValidationError(std::string("missing required path: ") + what);
}

std::string jsonl(std::span<const ojson> records) {
  std::string out;
  for (const auto& r : records) out += r.dump() + '\n';
  return out;
}

std::vector<ExampleRecord> load_examples(const std::string& path, bool replace_first) {
  const auto dialogues = load_dialogues(path);
  return explode_all(dialogues, replace_first);
}

std::unique_ptr<Retriever> load_matching_index(const std::string& path, const Corpus& corpus) {
  auto index = load_index(path);
  if (index->size() != corpus.size())
    throw ValidationError("index " + path + " has " + std::to_string(index->size()) +
                          " passages but the corpus has " + std::to_string(corpus.size()));
  for (DocIndex d = 0; d < corpus.size(); ++d)
    if (index->passage_id(d) != corpus[d].id)
      throw ValidationError("index " + path + " does not match the corpus at passage " + corpus[d].id);
  return index;
}

}  // namespace

IdfTable corpus_idf(const Corpus& corpus) {
  std::vector<text::TokenSeq> docs;
  docs.reserve(corpus.size());
  for (const auto& p : corpus.passages()) docs.push_back(analyze(p.text, kMaxPassageTokens));
  return IdfTable::build(docs, false);
}

SynthBenchmark run_synth(const SynthConfig& config, const std::string& out_dir) {
  require(out_dir, "synth output directory");
  auto bench = generate_benchmark(config);
  write_benchmark(out_dir, bench, config);
  return bench;
}

void run_index(const IndexOptions& o) {
  require(o.passages, "passages");
  require(o.out, "index output");
  const auto kind = parse_retriever_kind(o.retriever);
  const auto corpus = load_passages(o.passages);
  const auto index = build_retriever(corpus, kind, o.dense_dim);
  save_index(*index, o.out);
}

LabelingStats run_weaklabel(const WeakLabelOptions& o) {
  require(o.dialogues, "dialogues");
  require(o.passages, "passages");
  require(o.out, "labels output");
  LabelingOptions lo;
  lo.pool_size = o.pool_size;
  lo.seed = o.seed;
  if (o.source != "auto") lo.source = parse_query_source(o.source);
  const auto corpus = load_passages(o.passages);
  const auto examples = load_examples(o.dialogues, o.replace_first);
  const auto bm25 = Bm25Index::build(corpus);
  const WeakLabeler labeler(corpus, bm25);
  LabelingStats stats;
  const auto labels = labeler.label_all(examples, lo, &stats);
  write_weak_labels(o.out, labels, corpus);
  return stats;
}

TrainSummary run_train(const TrainOptions& o) {
  require(o.dialogues, "dialogues");
  require(o.passages, "passages");
  require(o.labels, "weak labels");
  require(o.index, "index");
  require(o.out_dir, "train output directory");
  if (!(o.dev_fraction > 0.0 && o.dev_fraction < 1.0))
    throw ValidationError("train: dev fraction must lie in (0, 1)");

  TrainConfig config = o.config;
  if (o.init == "plain") {
    config.init = InitMode::plain;
  } else if (o.init == "ce-pretrained" || o.init == "ce") {
    config.init = InitMode::ce_pretrained;
  } else if (o.init == "checkpoint") {
    require(o.init_checkpoint, "initial checkpoint");
    config.init = InitMode::checkpoint;
    config.init_params = load_policy(o.init_checkpoint);
  } else {
    throw ValidationError("unknown init mode '" + o.init + "' (expected plain|ce-pretrained|checkpoint)");
  }
  config.validate();

  const auto corpus = load_passages(o.passages);
  const auto dialogues = load_dialogues(o.dialogues);
  const auto labels = load_weak_labels(o.labels, corpus);
  const auto retriever = load_matching_index(o.index, corpus);
  if (dialogues.size() < 2) throw ValidationError("train: need at least 2 dialogues for a dev split");

  // The last dialogues form the dev split.
  auto n_dev = static_cast<std::size_t>(std::llround(o.dev_fraction * static_cast<double>(dialogues.size())));
  n_dev = std::clamp<std::size_t>(n_dev, 1, dialogues.size() - 1);
  const std::span<const Dialogue> all(dialogues);
  const auto train_ex = explode_all(all.first(dialogues.size() - n_dev), o.replace_first);
  const auto dev_ex = explode_all(all.last(n_dev), o.replace_first);

  const auto idf = corpus_idf(corpus);
  TrainSummary summary;
  const auto train_set =
      make_train_examples(train_ex, labels, idf, config.ce_mask_fraction, config.seed, &summary.rewrites_attached);
  const auto dev_examples = make_train_examples(dev_ex, labels, idf, 0.0, config.seed);
  if (train_set.empty()) throw ValidationError("train: no training example has a weak label");
  if (dev_examples.empty()) throw ValidationError("train: no dev example has a weak label");
  summary.train_examples = train_set.size();
  summary.dev_examples = dev_examples.size();
  const auto dev = make_dev_set(dev_examples, config.batch_size);

  std::vector<ojson> metrics;
  summary.result = train(config, train_set, dev, *retriever, [&](const MetricRecord& m) {
    metrics.push_back(ojson::parse(serialize_metric(m)));
  });
  summary.initial_dev_accuracy = summary.result.metrics.front().dev_accuracy.value_or(0.0);

  const auto& state = summary.result.state;
  const auto& stats = summary.result.stats;
  ojson js;
  js["train_examples"] = summary.train_examples;
  js["dev_examples"] = summary.dev_examples;
  js["rewrites_attached"] = summary.rewrites_attached;
  js["rewrites_consumed"] = stats.rewrites_consumed;
  js["steps"] = state.step;
  js["initial_dev_accuracy"] = summary.initial_dev_accuracy;
  js["best_dev_accuracy"] = state.best_dev_accuracy;
  js["best_step"] = state.best_step;
  js["rewards"] = {{"-1", stats.rewards.by_value[0]},
                   {"0", stats.rewards.by_value[1]},
                   {"1", stats.rewards.by_value[2]},
                   {"out_of_range", stats.rewards.out_of_range}};
  js["zero_gradient_steps"] = stats.zero_gradient_steps;

  namespace fs = std::filesystem;
  const fs::path dir(o.out_dir);
  save_policy((dir / "policy.ckpt").string(), state.best_params, config.threshold);
  write_file_atomic((dir / "metrics.jsonl").string(), jsonl(metrics));
  write_file_atomic((dir / "train_stats.json").string(), js.dump(2) + '\n');
  return summary;
}

// ---------------------------------------------------------------------------

std::vector<RewriteRecord> policy_rewrites(std::span<const ExampleRecord> examples,
                                           const IdfTable& idf, const PolicyParams& params,
                                           double threshold, const std::string& mode,
                                           std::size_t target_len) {
  if (mode != "greedy" && mode != "brevity")
    throw ValidationError("unknown rewrite mode '" + mode + "' (expected greedy|brevity)");
  if (mode == "brevity" && target_len == 0)
    throw ValidationError("brevity rewriting needs a positive target length");
  std::vector<RewriteRecord> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    const auto input = featurize(ex, idf);
    RewriteCandidate c;
    if (mode == "greedy") {
      c = greedy_rewrite(params, input, threshold);
    } else {
      // A question longer than the target is kept whole.
      c = brevity_decode(params, input, std::max(target_len, input.question_tokens.size()));
    }
    out.push_back({ex.id(), c.text, "policy"});
  }
  return out;
}

std::vector<RewriteRecord> make_rewrites(const RewriteOptions& o) {
  require(o.dialogues, "dialogues");
  const auto examples = load_examples(o.dialogues, o.replace_first);
  std::vector<RewriteRecord> out;
  if (o.source == "policy") {
    require(o.checkpoint, "checkpoint");
    require(o.passages, "passages");
    double threshold = 0.5;
    const auto params = load_policy(o.checkpoint, &threshold);
    const auto corpus = load_passages(o.passages);
    return policy_rewrites(examples, corpus_idf(corpus), params, threshold, o.mode, o.target_len);
  }
  if (o.source == "question-only") {
    for (const auto& ex : examples) out.push_back({ex.id(), std::string(text::trim(ex.question)), o.source});
  } else if (o.source == "dialogue-context") {
    for (const auto& ex : examples) out.push_back({ex.id(), build_context_string(ex), o.source});
  } else if (o.source == "human-rewrite") {
    std::vector<std::string> missing;
    for (const auto& ex : examples) {
      if (!ex.human_rewrite) {
        missing.push_back(ex.id());
        continue;
      }
      out.push_back({ex.id(), *ex.human_rewrite, o.source});
    }
    if (!missing.empty()) {
      std::string msg = "rewrite: " + std::to_string(missing.size()) + " example(s) have no human rewrite:";
      for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += ' ' + missing[i];
      if (missing.size() > 20) msg += " ...";
      throw ValidationError(msg);
    }
  } else {
    throw ValidationError("unknown rewrite source '" + o.source +
                          "' (expected policy|question-only|dialogue-context|human-rewrite)");
  }
  return out;
}

std::string serialize_rewrites(const std::vector<RewriteRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    ojson j;
    j["example_id"] = r.example_id;
    j["rewrite"] = r.rewrite;
    j["source"] = r.source;
    out += j.dump() + '\n';
  }
  return out;
}

std::vector<RewriteRecord> parse_rewrites(std::string_view content) {
  std::vector<RewriteRecord> out;
  std::size_t line_no = 0;
  for (auto line : split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = ojson::parse(line);
      out.push_back({j.at("example_id").get<std::string>(), j.at("rewrite").get<std::string>(),
                     j.value("source", std::string())});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("rewrites line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RewriteRecord> run_rewrite(const RewriteOptions& o) {
  require(o.out, "rewrites output");
  auto records = make_rewrites(o);
  write_file_atomic(o.out, serialize_rewrites(records));
  return records;
}

RunFile run_retrieve(const RetrieveOptions& o) {
  require(o.queries, "queries");
  require(o.index, "index");
  require(o.out, "run output");
  if (o.k == 0) throw ValidationError("retrieve: k must be positive");
  const auto queries = parse_rewrites(read_file(o.queries));
  if (!std::filesystem::exists(o.index)) throw ValidationError("retrieve: index " + o.index + " does not exist");
  const auto index = load_index(o.index);
  RunFile run;
  run.tag = !o.tag.empty() ? o.tag : (!queries.empty() && !queries.front().source.empty() ? queries.front().source : "run");
  if (run.tag.find_first_of(" \t") != std::string::npos) throw ValidationError("retrieve: run tag must not contain spaces");
  std::set<std::string> seen;
  for (const auto& q : queries) {
    if (!seen.insert(q.example_id).second)
      throw ValidationError("retrieve: duplicate query for example " + q.example_id);
    RunQuery rq;
    rq.example_id = q.example_id;
    rq.query = q.rewrite;
    const auto hits = index->retrieve(q.rewrite, std::min(o.k, index->size()));
    for (std::size_t r = 0; r < hits.size(); ++r)
      rq.ranked.push_back({index->passage_id(hits[r].doc), r + 1, hits[r].score});
    run.queries.push_back(std::move(rq));
  }
  write_run(o.out, run);
  return run;
}

EvalReport run_eval(const EvalOptions& o) {
  require(o.run, "run");
  require(o.qrels, "qrels");
  const auto mode = parse_eval_mode(o.mode);
  const auto run = load_run(o.run);
  const auto qrels = load_qrels(o.qrels);
  std::map<std::string, std::string> subsets;
  if (!o.dialogues.empty())
    for (const auto& ex : load_examples(o.dialogues, false)) subsets[ex.id()] = ex.subset;
  auto report = evaluate(run, qrels, mode, o.ks, subsets);
  if (!o.out.empty()) write_file_atomic(o.out, serialize_report(report));
  return report;
}

AnalyzeReport run_analyze(const AnalyzeOptions& o) {
  require(o.dialogues, "dialogues");
  if (o.split.empty() && o.stats.empty()) throw ValidationError("analyze: nothing to do (give a split or stats)");
  if (!o.split.empty() && o.split != "topic" && o.split != "length")
    throw ValidationError("unknown split '" + o.split + "' (expected topic|length)");
  const auto mode = parse_eval_mode(o.mode);
  const auto examples = load_examples(o.dialogues, false);

  std::optional<Corpus> corpus;
  if (!o.passages.empty()) corpus = load_passages(o.passages);
  std::optional<Qrels> qrels;
  if (!o.qrels.empty()) qrels = load_qrels(o.qrels);

  AnalyzeReport report;
  std::vector<ojson> records;
  std::ostringstream table;
  if (o.split == "topic") {
    if (!corpus || !qrels) throw ValidationError("analyze: the topic split needs passages and qrels");
    for (const auto& [id, c] : topic_split(examples, *qrels, *corpus))
      report.groups[id] = std::string(topic_category_name(c));
  } else if (o.split == "length") {
    for (const auto& [id, b] : length_buckets(examples)) report.groups[id] = std::string(length_bucket_name(b));
  }
  if (!o.split.empty()) {
    std::map<std::string, std::size_t> counts;
    for (const auto& [id, g] : report.groups) {
      ++counts[g];
      records.push_back({{"example_id", id}, {"split", o.split}, {"group", g}});
    }
    table << "split: " << o.split << '\n';
    for (const auto& [g, n] : counts) {
      records.push_back({{"split", o.split}, {"group", g}, {"n", n}});
      table << "  " << g << ": " << n << '\n';
    }
    if (!o.run.empty()) {
      if (!qrels) throw ValidationError("analyze: evaluating a run needs qrels");
      report.eval = evaluate(load_run(o.run), *qrels, mode, {}, report.groups);
      const std::string lines = serialize_report(*report.eval);
      for (auto line : split_lines(lines))
        if (!line.empty()) records.push_back(ojson::parse(line));
      table << format_report_table(*report.eval);
    }
  }
  if (!o.stats.empty()) {
    if (!corpus) throw ValidationError("analyze: rewrite stats need passages");
    std::map<std::string, const ExampleRecord*> by_id;
    for (const auto& ex : examples) by_id[ex.id()] = &ex;
    std::vector<RewriteSample> samples;
    for (const auto& r : parse_rewrites(read_file(o.stats))) {
      std::vector<std::string> gold_ids;
      if (qrels) {
        auto it = qrels->find(r.example_id);
        if (it != qrels->end()) gold_ids.assign(it->second.begin(), it->second.end());
      } else if (auto it = by_id.find(r.example_id); it != by_id.end()) {
        gold_ids = it->second->gold;
      }
      if (gold_ids.empty()) continue;  // nothing to overlap with
      RewriteSample s{r.rewrite, {}};
      for (const auto& g : gold_ids) s.gold_texts.push_back(corpus->passages()[corpus->at(g)].text);
      samples.push_back(std::move(s));
    }
    report.stats = rewrite_stats(samples);
    records.push_back({{"stats", std::filesystem::path(o.stats).filename().string()},
                       {"n", report.stats->n},
                       {"avg_length", report.stats->avg_length},
                       {"overlap_pct", report.stats->overlap_pct}});
    char buf[128];
    std::snprintf(buf, sizeof buf, "rewrites: n=%zu L=%.2f OL=%.1f%%\n", report.stats->n,
                  report.stats->avg_length, report.stats->overlap_pct);
    table << buf;
  }
  report.table = table.str();
  if (!o.out.empty()) write_file_atomic(o.out, jsonl(records));
  return report;
}

// ---------------------------------------------------------------------------

PipelineResult run_pipeline(const PipelineOptions& o) {
  require(o.out_dir, "pipeline output directory");
  namespace fs = std::filesystem;
  const fs::path root(o.out_dir);
  auto path = [&](const std::string& rel) { return (root / rel).string(); };
  o.synth.validate();
  parse_retriever_kind(o.retriever);
  parse_eval_mode(o.eval_mode);
  o.train.config.validate();

  PipelineResult res;
  run_synth(o.synth, path("data"));
  const std::string index_path = path("index." + o.retriever);
  run_index({path("data/passages.jsonl"), index_path, o.retriever, o.dense_dim});

  WeakLabelOptions wl = o.weaklabel;
  wl.dialogues = path("data/dialogues.jsonl");
  wl.passages = path("data/passages.jsonl");
  wl.out = path("labels.jsonl");
  res.labeling = run_weaklabel(wl);

  TrainOptions tr = o.train;
  tr.dialogues = wl.dialogues;
  tr.passages = wl.passages;
  tr.labels = wl.out;
  tr.index = index_path;
  tr.out_dir = path("train");
  res.train = run_train(tr);

  const auto test_examples = load_examples(path("data/test.jsonl"), tr.replace_first);
  const auto corpus = load_passages(wl.passages);
  const auto idf = corpus_idf(corpus);

  auto score = [&](const std::string& name, const std::vector<RewriteRecord>& rewrites) {
    const std::string rw = path("rewrites/" + name + ".jsonl");
    write_file_atomic(rw, serialize_rewrites(rewrites));
    run_retrieve({rw, index_path, path("runs/" + name + ".run"), 100, name});
    return run_eval({path("runs/" + name + ".run"), path("data/qrels.txt"), path("data/test.jsonl"),
                     path("reports/" + name + ".jsonl"), o.eval_mode, o.ks});
  };

  double threshold = 0.5;
  const auto params = load_policy(path("train/policy.ckpt"), &threshold);
  res.policy = score("policy", policy_rewrites(test_examples, idf, params, threshold, "greedy", 0));
  res.zero_policy =
      score("zero-policy", policy_rewrites(test_examples, idf, PolicyParams::zeros(), threshold, "greedy", 0));
  RewriteOptions ro;
  ro.dialogues = path("data/test.jsonl");
  ro.replace_first = tr.replace_first;
  ro.source = "question-only";
  res.question_only = score("question-only", make_rewrites(ro));
  ro.source = "human-rewrite";
  res.human_rewrite = score("human-rewrite", make_rewrites(ro));

  for (const char* split : {"topic", "length"}) {
    AnalyzeOptions ao;
    ao.dialogues = path("data/test.jsonl");
    ao.passages = wl.passages;
    ao.qrels = path("data/qrels.txt");
    ao.run = path("runs/policy.run");
    ao.split = split;
    ao.stats = path("rewrites/policy.jsonl");
    ao.out = path(std::string("analysis/") + split + ".jsonl");
    ao.mode = o.eval_mode;
    run_analyze(ao);
  }
  return res;
}

}  // namespace convqr
