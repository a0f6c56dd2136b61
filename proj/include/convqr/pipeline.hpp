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


// One function per CLI subcommand. Each loads and validates all inputs
// before it writes anything, and every output file is written atomically.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "convqr/analysis.hpp"
#include "convqr/eval.hpp"
#include "convqr/synth.hpp"
#include "convqr/trainer.hpp"
#include "convqr/weaksup.hpp"

namespace convqr {

// Idf statistics the policy features are computed from.
IdfTable corpus_idf(const Corpus& corpus);

// Generates the benchmark and writes it under out_dir.
SynthBenchmark run_synth(const SynthConfig& config, const std::string& out_dir);

struct IndexOptions {
  std::string passages;
  std::string out;
  std::string retriever = "bm25";
  std::size_t dense_dim = kDefaultDenseDim;
};
void run_index(const IndexOptions& o);

struct WeakLabelOptions {
  std::string dialogues;
  std::string passages;
  std::string out;
  std::size_t pool_size = 100;
  std::string source = "auto";  // auto | human_rewrite | dialogue_context
  std::uint64_t seed = 7;
  bool replace_first = false;
};
LabelingStats run_weaklabel(const WeakLabelOptions& o);

struct TrainOptions {
  std::string dialogues;
  std::string passages;
  std::string labels;
  std::string index;
  std::string out_dir;
  std::string init = "plain";  // plain | ce-pretrained (alias ce) | checkpoint
  std::string init_checkpoint;
  double dev_fraction = 0.1;
  bool replace_first = false;
  TrainConfig config;
};

struct TrainSummary {
  std::size_t train_examples = 0;
  std::size_t dev_examples = 0;
  std::size_t rewrites_attached = 0;
  double initial_dev_accuracy = 0.0;
  TrainResult result;
};

// Writes policy.ckpt (best dev snapshot), metrics.jsonl and train_stats.json.
TrainSummary run_train(const TrainOptions& o);

struct RewriteOptions {
  std::string dialogues;
  std::string passages;
  std::string checkpoint;
  std::string out;
  std::string source = "policy";  // policy | question-only | dialogue-context | human-rewrite
  std::string mode = "greedy";    // greedy | brevity
  std::size_t target_len = 0;     // brevity only
  bool replace_first = false;
};

struct RewriteRecord {
  std::string example_id;
  std::string rewrite;
  std::string source;
};

std::vector<RewriteRecord> make_rewrites(const RewriteOptions& o);
// Policy rewrites for already loaded examples.
std::vector<RewriteRecord> policy_rewrites(std::span<const ExampleRecord> examples,
                                           const IdfTable& idf, const PolicyParams& params,
                                           double threshold, const std::string& mode,
                                           std::size_t target_len);
std::string serialize_rewrites(const std::vector<RewriteRecord>& records);
std::vector<RewriteRecord> parse_rewrites(std::string_view content);
std::vector<RewriteRecord> run_rewrite(const RewriteOptions& o);

struct RetrieveOptions {
  std::string queries;  // rewrites.jsonl
  std::string index;
  std::string out;
  std::size_t k = 100;
  std::string tag;      // defaults to the rewrite source
};
RunFile run_retrieve(const RetrieveOptions& o);

struct EvalOptions {
  std::string run;
  std::string qrels;
  std::string dialogues;  // optional, supplies subset tags
  std::string out;        // optional report path
  std::string mode = "updated";
  std::vector<std::size_t> ks = {10, 100};
};
EvalReport run_eval(const EvalOptions& o);

struct AnalyzeOptions {
  std::string dialogues;
  std::string passages;
  std::string qrels;
  std::string run;        // evaluated per split group when set
  std::string split;      // "", topic | length
  std::string stats;      // optional rewrites.jsonl for length/overlap stats
  std::string out;        // report path (JSONL)
  std::string mode = "updated";
};

struct AnalyzeReport {
  std::map<std::string, std::string> groups;  // example id -> group name
  std::optional<EvalReport> eval;
  std::optional<RewriteStats> stats;
  std::string table;
};
AnalyzeReport run_analyze(const AnalyzeOptions& o);

// synth -> index -> weaklabel -> train -> rewrite -> retrieve -> eval -> analyze
// under one output directory.
struct PipelineOptions {
  std::string out_dir;
  SynthConfig synth;
  std::string retriever = "bm25";
  std::size_t dense_dim = kDefaultDenseDim;
  WeakLabelOptions weaklabel;  // paths are filled in
  TrainOptions train;          // paths are filled in
  std::string eval_mode = "updated";
  std::vector<std::size_t> ks = {10, 100};
};

struct PipelineResult {
  TrainSummary train;
  LabelingStats labeling;
  EvalReport policy;
  EvalReport zero_policy;
  EvalReport question_only;
  EvalReport human_rewrite;
};
PipelineResult run_pipeline(const PipelineOptions& o);

}  // namespace convqr
