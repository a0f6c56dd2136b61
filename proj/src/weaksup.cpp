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

#include "convqr/weaksup.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "convqr/error.hpp"

namespace convqr {

using ojson = nlohmann::ordered_json;

std::string_view query_source_name(QuerySource s) {
  return s == QuerySource::human_rewrite ? "human_rewrite" : "dialogue_context";
}

QuerySource parse_query_source(std::string_view name) {
  if (name == "human_rewrite") return QuerySource::human_rewrite;
  if (name == "dialogue_context") return QuerySource::dialogue_context;
  throw ValidationError("unknown query source '" + std::string(name) +
                        "' (expected human_rewrite|dialogue_context)");
}

DocIndex sample_hard_negative(DocIndex positive, std::span<const DocIndex> top,
                              std::size_t corpus_size, Rng& rng) {
  if (corpus_size < 2) throw ValidationError("hard negative: corpus needs at least 2 passages");
  const bool from_top = rng.coin();
  if (from_top) {
    std::vector<DocIndex> pool;
    pool.reserve(top.size());
    for (auto d : top)
      if (d != positive) pool.push_back(d);
    if (!pool.empty()) return pool[rng.uniform_index(pool.size())];
  }
  auto j = static_cast<DocIndex>(rng.uniform_index(corpus_size - 1));
  return j >= positive ? j + 1 : j;
}

bool CandidatePool::contains(DocIndex d) const {
  return std::binary_search(passages.begin(), passages.end(), d);
}

namespace {

template <typename Get>
CandidatePool make_pool(std::size_t n, Get get) {
  CandidatePool pool;
  pool.positives.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const WeakLabel& l = get(i);
    pool.passages.push_back(l.positive);
    pool.passages.push_back(l.negative);
    pool.positives.push_back(l.positive);
  }
  std::sort(pool.passages.begin(), pool.passages.end());
  pool.passages.erase(std::unique(pool.passages.begin(), pool.passages.end()), pool.passages.end());
  return pool;
}

}  // namespace

CandidatePool build_candidate_pool(std::span<const WeakLabel> batch) {
  return make_pool(batch.size(), [&](std::size_t i) -> const WeakLabel& { return batch[i]; });
}

CandidatePool build_candidate_pool(std::span<const WeakLabel* const> batch) {
  return make_pool(batch.size(), [&](std::size_t i) -> const WeakLabel& { return *batch[i]; });
}

// ---------------------------------------------------------------------------

WeakLabeler::WeakLabeler(const Corpus& corpus, const Bm25Index& index)
    : corpus_(corpus), index_(index) {
  if (corpus.size() != index.size())
    throw ValidationError("weak labeler: index and corpus sizes differ");
  tokens_.reserve(corpus.size());
  for (const auto& p : corpus.passages()) tokens_.push_back(analyze(p.text, kMaxPassageTokens));
}

std::string WeakLabeler::prefilter_query(const ExampleRecord& example, QuerySource source) {
  if (source == QuerySource::human_rewrite) {
    if (!example.human_rewrite)
      throw ValidationError("example " + example.id() + " has no human rewrite to query with");
    return *example.human_rewrite;
  }
  return build_context_string(example);
}

QuerySource WeakLabeler::default_source(const ExampleRecord& example) {
  return example.human_rewrite ? QuerySource::human_rewrite : QuerySource::dialogue_context;
}

std::vector<DocIndex> WeakLabeler::prefilter(const ExampleRecord& example, QuerySource source,
                                             std::size_t pool_size) const {
  const auto hits = index_.retrieve(prefilter_query(example, source), pool_size);
  std::vector<DocIndex> docs;
  docs.reserve(hits.size());
  for (const auto& h : hits) docs.push_back(h.doc);
  return docs;
}

PositiveLabel WeakLabeler::best_passage(std::span<const DocIndex> candidates,
                                        std::string_view answer, Rng& rng) const {
  const auto answer_tokens = text::content_tokens(answer);
  if (answer_tokens.empty()) throw ValidationError("weak label: empty answer");
  if (candidates.empty()) throw ValidationError("weak label: no retrievable candidates");

  std::vector<DocIndex> docs(candidates.begin(), candidates.end());
  std::sort(docs.begin(), docs.end());
  docs.erase(std::unique(docs.begin(), docs.end()), docs.end());

  std::vector<DocIndex> tied;
  text::SpanMatch best;
  bool first = true;
  for (auto d : docs) {
    const auto m = text::best_span_f1(tokens_[d], answer_tokens);
    const int c = first ? 1 : text::compare_span_f1(m, best, answer_tokens.size());
    if (c > 0) {
      best = m;
      tied.assign(1, d);
      first = false;
    } else if (c == 0) {
      tied.push_back(d);
    }
  }
  PositiveLabel label;
  label.positive = tied.size() == 1 ? tied.front() : tied[rng.uniform_index(tied.size())];
  label.span = text::best_span_f1(tokens_[label.positive], answer_tokens);
  label.f1 = label.span.f1;
  label.n_tied = tied.size();
  return label;
}

PositiveLabel WeakLabeler::label_positive(const ExampleRecord& example, std::size_t pool_size,
                                          QuerySource source, Rng& rng) const {
  if (text::content_tokens(example.answer).empty())
    throw ValidationError("weak label: example " + example.id() + " has an empty answer");
  const auto candidates = prefilter(example, source, pool_size);
  return best_passage(candidates, example.answer, rng);
}

std::vector<WeakLabel> WeakLabeler::label_all(std::span<const ExampleRecord> examples,
                                              const LabelingOptions& options,
                                              LabelingStats* stats) const {
  if (options.pool_size == 0) throw ValidationError("weak label: pool size must be positive");
  constexpr std::size_t kNegativePool = 100;
  LabelingStats local;
  std::vector<WeakLabel> out;
  for (const auto& ex : examples) {
    if (text::content_tokens(ex.answer).empty()) {
      ++local.skipped_no_answer;
      continue;
    }
    const QuerySource source = options.source.value_or(default_source(ex));
    if (source == QuerySource::human_rewrite) ++local.rewrites_read;
    const std::string id = ex.id();
    Rng rng(derive_seed(options.seed, fnv1a64(id)));

    const auto top = prefilter(ex, source, std::max(options.pool_size, kNegativePool));
    const auto pool = std::span(top).first(std::min(options.pool_size, top.size()));
    const auto positive = best_passage(pool, ex.answer, rng);
    const auto negatives = std::span(top).first(std::min(kNegativePool, top.size()));
    const DocIndex negative = sample_hard_negative(positive.positive, negatives, corpus_.size(), rng);

    if (positive.span.overlap == 0) ++local.low_signal;
    if (positive.n_tied > 1) ++local.tied;
    ++local.labeled;
    out.push_back({id, positive.positive, negative, positive.f1, source});
  }
  if (stats) *stats = local;
  return out;
}

// ---------------------------------------------------------------------------

std::string serialize_weak_labels(std::span<const WeakLabel> labels, const Corpus& corpus) {
  std::string out;
  for (const auto& l : labels) {
    ojson j;
    j["example_id"] = l.example_id;
    j["positive"] = corpus[l.positive].id;
    j["negative"] = corpus[l.negative].id;
    j["f1"] = l.f1;
    j["source"] = std::string(query_source_name(l.source));
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<WeakLabel> parse_weak_labels(std::string_view content, const Corpus& corpus) {
  std::vector<WeakLabel> out;
  std::size_t line_no = 0;
  for (auto line : split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "weak labels line " + std::to_string(line_no) + ": ";
    try {
      auto j = ojson::parse(line);
      WeakLabel l;
      l.example_id = j.at("example_id").get<std::string>();
      l.positive = corpus.at(j.at("positive").get<std::string>());
      l.negative = corpus.at(j.at("negative").get<std::string>());
      l.f1 = j.at("f1").get<double>();
      l.source = parse_query_source(j.at("source").get<std::string>());
      if (l.positive == l.negative) throw ValidationError("positive equals negative");
      out.push_back(std::move(l));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  return out;
}

void write_weak_labels(const std::string& path, std::span<const WeakLabel> labels,
                       const Corpus& corpus) {
  write_file_atomic(path, serialize_weak_labels(labels, corpus));
}

std::vector<WeakLabel> load_weak_labels(const std::string& path, const Corpus& corpus) {
  return parse_weak_labels(read_file(path), corpus);
}

}  // namespace convqr
