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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "convqr/corpus.hpp"
#include "convqr/retriever.hpp"
#include "convqr/rng.hpp"
#include "convqr/text.hpp"

namespace convqr {

// What the BM25 pre-filter is queried with.
enum class QuerySource { human_rewrite, dialogue_context };

std::string_view query_source_name(QuerySource s);
QuerySource parse_query_source(std::string_view name);

struct PositiveLabel {
  DocIndex positive = 0;
  double f1 = 0.0;
  text::SpanMatch span;
  std::size_t n_tied = 1;  // passages sharing the winning f1
};

struct WeakLabel {
  std::string example_id;
  DocIndex positive = 0;
  DocIndex negative = 0;
  double f1 = 0.0;
  QuerySource source = QuerySource::human_rewrite;
};

// Draws a hard negative different from `positive`: with probability 1/2
// uniformly from `top` (minus the positive), otherwise uniformly from the
// whole corpus (minus the positive). When `top` holds nothing but the
// positive the corpus branch is used. Throws ValidationError when
// corpus_size < 2.
DocIndex sample_hard_negative(DocIndex positive, std::span<const DocIndex> top,
                              std::size_t corpus_size, Rng& rng);

// P_X for one batch: the union of positives and negatives.
struct CandidatePool {
  std::vector<DocIndex> passages;   // sorted, unique
  std::vector<DocIndex> positives;  // one per batch example, batch order

  bool contains(DocIndex d) const;
};

CandidatePool build_candidate_pool(std::span<const WeakLabel> batch);
CandidatePool build_candidate_pool(std::span<const WeakLabel* const> batch);

struct LabelingOptions {
  std::size_t pool_size = 100;
  // Unset: the human rewrite when present, else the dialogue context.
  std::optional<QuerySource> source;
  std::uint64_t seed = 7;
};

struct LabelingStats {
  std::size_t labeled = 0;
  std::size_t skipped_no_answer = 0;
  std::size_t low_signal = 0;      // best f1 == 0 over the whole pool
  std::size_t tied = 0;            // positive chosen among >1 tied passages
  std::size_t rewrites_read = 0;   // human rewrites used as pre-filter input
};

// Applies the answer-span heuristic behind a BM25 pre-filter. Holds the
// analyzed corpus so repeated labeling does not re-tokenize passages.
class WeakLabeler {
 public:
  WeakLabeler(const Corpus& corpus, const Bm25Index& index);

  // The BM25 query for an example under `source`. Throws ValidationError if
  // the human rewrite is requested but missing.
  static std::string prefilter_query(const ExampleRecord& example, QuerySource source);
  static QuerySource default_source(const ExampleRecord& example);

  // BM25 top-`pool_size` candidates for the example's pre-filter query.
  std::vector<DocIndex> prefilter(const ExampleRecord& example, QuerySource source,
                                  std::size_t pool_size) const;

  // argmax over candidates of best_span_f1(passage, answer); passage ties
  // resolved uniformly with `rng`. Throws ValidationError for an empty
  // answer or an empty candidate list.
  PositiveLabel best_passage(std::span<const DocIndex> candidates, std::string_view answer,
                             Rng& rng) const;

  PositiveLabel label_positive(const ExampleRecord& example, std::size_t pool_size,
                               QuerySource source, Rng& rng) const;

  // Labels every example with a non-empty answer; output follows input order.
  // Each example draws from its own stream derived from (seed, example id),
  // so a label does not depend on which other examples are present.
  std::vector<WeakLabel> label_all(std::span<const ExampleRecord> examples,
                                   const LabelingOptions& options,
                                   LabelingStats* stats = nullptr) const;

  std::span<const std::string> passage_tokens(DocIndex d) const { return tokens_[d]; }

 private:
  const Corpus& corpus_;
  const Bm25Index& index_;
  std::vector<text::TokenSeq> tokens_;
};

// weaklabels.jsonl: {"example_id","positive","negative","f1","source"}
std::string serialize_weak_labels(std::span<const WeakLabel> labels, const Corpus& corpus);
std::vector<WeakLabel> parse_weak_labels(std::string_view content, const Corpus& corpus);
void write_weak_labels(const std::string& path, std::span<const WeakLabel> labels,
                       const Corpus& corpus);
std::vector<WeakLabel> load_weak_labels(const std::string& path, const Corpus& corpus);

}  // namespace convqr
