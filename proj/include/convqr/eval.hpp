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


// Retrieval metrics over run files and qrels.
//
// Two averaging modes share one summation. "original" divides by every
// evaluated example (examples without gold passages score 0); "updated"
// divides by the examples that have gold passages. The two therefore differ
// by the factor n_valid / n_total.

#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace convqr {

inline constexpr std::size_t kMrrCutoff = 100;

struct RunEntry {
  std::string passage_id;
  std::size_t rank = 0;  // 1-based
  double score = 0.0;

  bool operator==(const RunEntry&) const = default;
};

struct RunQuery {
  std::string example_id;
  std::string query;  // text sent to the retriever
  std::vector<RunEntry> ranked;

  bool operator==(const RunQuery&) const = default;
};

struct RunFile {
  std::string tag;  // rewriter name
  std::vector<RunQuery> queries;

  bool operator==(const RunFile&) const = default;
};

// Layout: "#query <TAB> id <TAB> text" once per query (so queries with no
// results survive), then TREC lines "id Q0 passage rank score tag".
std::string serialize_run(const RunFile& run);
RunFile parse_run(std::string_view content);
void write_run(const std::string& path, const RunFile& run);
RunFile load_run(const std::string& path);

// example id -> gold passage ids. An empty set marks an example that exists
// but has no gold label.
using Qrels = std::map<std::string, std::set<std::string>>;

// Lines "id 0 passage rel". rel 0 lines only register the example.
std::string serialize_qrels(const Qrels& qrels);
Qrels parse_qrels(std::string_view content);
void write_qrels(const std::string& path, const Qrels& qrels);
Qrels load_qrels(const std::string& path);

// Reciprocal rank of the best-ranked gold passage within `cutoff`, else 0.
double mrr(std::span<const std::string> ranked, const std::set<std::string>& gold,
           std::size_t cutoff = kMrrCutoff);
// |gold ∩ top-k| / |gold|. Throws ValidationError when gold is empty.
double recall_at_k(std::span<const std::string> ranked, const std::set<std::string>& gold,
                   std::size_t k);

enum class EvalMode { original, updated };

std::string_view eval_mode_name(EvalMode mode);
EvalMode parse_eval_mode(std::string_view name);

struct MetricSet {
  double mrr = 0.0;
  std::vector<std::pair<std::size_t, double>> recall;  // (k, Recall@k)
  std::size_t n_total = 0;
  std::size_t n_valid = 0;
};

struct EvalReport {
  EvalMode mode = EvalMode::updated;
  std::string tag;
  MetricSet overall;
  std::map<std::string, MetricSet> subsets;  // keyed by subset tag
};

// Scores every run query against qrels. `subsets` maps example ids to their
// subset tag; untagged examples only count toward the overall numbers.
// Empty `ks` means {10, 100}.
// Throws ValidationError listing run examples missing from qrels.
EvalReport evaluate(const RunFile& run, const Qrels& qrels, EvalMode mode,
                    std::span<const std::size_t> ks = {},
                    const std::map<std::string, std::string>& subsets = {});

// One JSON object per line: overall first, then subsets in tag order.
std::string serialize_report(const EvalReport& report);
std::string format_report_table(const EvalReport& report);

}  // namespace convqr
