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


#include "convqr/analysis.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <unordered_set>

#include "convqr/error.hpp"
#include "convqr/text.hpp"

namespace convqr {

std::string_view topic_category_name(TopicCategory c) {
  switch (c) {
    case TopicCategory::concentrated: return "concentrated";
    case TopicCategory::shifted: return "shifted";
    case TopicCategory::excluded: break;
  }
  return "excluded";
}

TopicSplit topic_split(std::span<const ExampleRecord> examples, const Qrels& qrels,
                       const Corpus& corpus) {
  std::map<std::string, std::vector<const ExampleRecord*>> by_dialogue;
  for (const auto& ex : examples) by_dialogue[ex.dialogue_id].push_back(&ex);

  auto gold_docs = [&](const ExampleRecord& ex) {
    std::set<std::string> docs;
    auto it = qrels.find(ex.id());
    if (it == qrels.end()) return docs;
    for (const auto& pid : it->second) {
      const auto d = corpus.find(pid);
      if (!d) throw ValidationError("topic split: gold passage '" + pid + "' of " + ex.id() +
                                    " is not in the corpus");
      docs.insert(corpus[*d].doc_id);
    }
    return docs;
  };

  TopicSplit split;
  for (auto& [id, turns] : by_dialogue) {
    std::sort(turns.begin(), turns.end(), [](const auto* a, const auto* b) {
      return a->question_number < b->question_number;
    });
    std::set<std::string> seen;
    for (const auto* ex : turns) {
      const auto docs = gold_docs(*ex);
      TopicCategory c = TopicCategory::excluded;
      if (ex->question_number > 1 && !docs.empty()) {
        const bool reused = std::any_of(docs.begin(), docs.end(),
                                        [&](const std::string& d) { return seen.count(d) > 0; });
        c = reused ? TopicCategory::concentrated : TopicCategory::shifted;
      }
      split[ex->id()] = c;
      seen.insert(docs.begin(), docs.end());
    }
  }
  return split;
}

std::string_view length_bucket_name(LengthBucket b) {
  switch (b) {
    case LengthBucket::one_two: return "1-2";
    case LengthBucket::three_four: return "3-4";
    case LengthBucket::five_plus: break;
  }
  return ">=5";
}

LengthBucket length_bucket(std::size_t n_questions) {
  if (n_questions <= 2) return LengthBucket::one_two;
  if (n_questions <= 4) return LengthBucket::three_four;
  return LengthBucket::five_plus;
}

std::map<std::string, LengthBucket> length_buckets(std::span<const ExampleRecord> examples) {
  std::map<std::string, LengthBucket> out;
  for (const auto& ex : examples) out[ex.id()] = length_bucket(ex.question_number);
  return out;
}

RewriteStats rewrite_stats(std::span<const RewriteSample> samples) {
  RewriteStats s;
  s.n = samples.size();
  if (samples.empty()) return s;
  double len_sum = 0.0;
  double ol_sum = 0.0;
  for (const auto& smp : samples) {
    const auto tokens = text::content_tokens(smp.rewrite);
    len_sum += static_cast<double>(tokens.size());
    std::unordered_set<std::string> gold;
    for (const auto& g : smp.gold_texts)
      for (auto& t : text::content_tokens(g)) gold.insert(std::move(t));
    std::size_t kept = 0;
    std::size_t hit = 0;
    for (const auto& t : tokens) {
      if (text::is_stopword(t)) continue;
      ++kept;
      if (gold.count(t)) ++hit;
    }
    if (kept > 0) ol_sum += 100.0 * static_cast<double>(hit) / static_cast<double>(kept);
  }
  const double n = static_cast<double>(samples.size());
  s.avg_length = len_sum / n;
  s.overlap_pct = ol_sum / n;
  return s;
}

RewriteCandidate brevity_decode(const PolicyParams& params, const PolicyInput& input,
                                std::size_t target_len, double* threshold_used) {
  const std::size_t base = input.question_tokens.size();
  if (target_len < base)
    throw ValidationError("brevity: target length " + std::to_string(target_len) +
                          " is shorter than the question (" + std::to_string(base) + " tokens)");
  const std::size_t budget = target_len - base;
  auto p = inclusion_probabilities(params, input);
  std::sort(p.begin(), p.end(), std::greater<>());
  // Rows kept at threshold t: those with p > t. The smallest admissible t is
  // 0.5 if the greedy rewrite fits, else the (budget+1)-th largest
  // probability, which drops it and everything tied with it.
  double t = 0.5;
  const auto above = static_cast<std::size_t>(
      std::count_if(p.begin(), p.end(), [](double v) { return v > 0.5; }));
  if (above > budget) t = std::clamp(p[budget], 0.5, 1.0);
  if (threshold_used) *threshold_used = t;
  return decode_threshold(params, input, t);
}

}  // namespace convqr
