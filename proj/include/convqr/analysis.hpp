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


// Breakdowns used to study where rewriting helps: topic-concentrated versus
// topic-shifted turns, context length buckets, rewrite length and overlap,
// and length-controlled decoding.

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "convqr/corpus.hpp"
#include "convqr/eval.hpp"
#include "convqr/policy.hpp"

namespace convqr {

enum class TopicCategory { concentrated, shifted, excluded };

std::string_view topic_category_name(TopicCategory c);

using TopicSplit = std::map<std::string, TopicCategory>;

// A turn is concentrated when some gold passage comes from a document whose
// passages were gold for an earlier turn of the same dialogue, and shifted
// when none does. First questions and turns without gold are excluded.
// Throws ValidationError for gold ids the corpus does not know.
TopicSplit topic_split(std::span<const ExampleRecord> examples, const Qrels& qrels,
                       const Corpus& corpus);

enum class LengthBucket { one_two, three_four, five_plus };

std::string_view length_bucket_name(LengthBucket b);
// Buckets by the number of user questions up to and including the current one.
LengthBucket length_bucket(std::size_t n_questions);
std::map<std::string, LengthBucket> length_buckets(std::span<const ExampleRecord> examples);

struct RewriteSample {
  std::string rewrite;
  std::vector<std::string> gold_texts;
};

struct RewriteStats {
  std::size_t n = 0;
  double avg_length = 0.0;   // content tokens per rewrite
  double overlap_pct = 0.0;  // mean share of non-stopword tokens found in the gold passages
};

// A rewrite without non-stopword tokens contributes overlap 0.
RewriteStats rewrite_stats(std::span<const RewriteSample> samples);

// Greedy decoding with the smallest threshold in [0.5, 1] whose rewrite has
// at most target_len tokens. Throws ValidationError when target_len is
// shorter than the question itself.
RewriteCandidate brevity_decode(const PolicyParams& params, const PolicyInput& input,
                                std::size_t target_len, double* threshold_used = nullptr);

}  // namespace convqr
