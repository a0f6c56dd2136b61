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

// Token-selection rewriting policy.
//
// The rewrite of an example is its current question followed by a subset of
// the distinct context tokens. Each candidate token i is kept independently
// with probability sigmoid(w . phi_i), so a rewrite's log-probability is a
// sum of Bernoulli log-likelihoods and every gradient is analytic:
//
//   d/dw log Pr(decisions) = sum_i (d_i - sigmoid(w . phi_i)) phi_i
//
// Greedy decoding keeps token i iff its probability exceeds a threshold
// (0.5 by default); sampling draws each decision independently.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "convqr/corpus.hpp"
#include "convqr/retriever.hpp"
#include "convqr/rng.hpp"

namespace convqr {

inline constexpr std::size_t kFeatureDim = 8;

enum Feature : std::size_t {
  kBias = 0,
  kIdf,                // idf / max idf, 0 for terms unknown to the corpus
  kRecency,            // 1 / distance of the most recent context turn holding it
  kCapitalized,        // capitalized somewhere other than sentence-initially
  kInPrevQuestion,     // occurs in an earlier user question
  kTermFrequency,      // ln(1+tf) / (1 + ln(1+tf)), tf counted over the context
  kStopword,
  kQuestionOverlap,    // occurs in a context turn sharing a content word with u_n
};

const std::array<std::string_view, kFeatureDim>& feature_names();

// Row-major feature matrix, one row per candidate context token.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols_, cols_); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Everything the policy conditions on for one example.
struct PolicyInput {
  std::string question;                  // u_n, trimmed
  text::TokenSeq question_tokens;        // tokenize(u_n)
  std::vector<std::string> candidates;   // distinct context tokens, first-occurrence order
  FeatureMatrix features;                // candidates.size() x kFeatureDim
};

PolicyInput featurize(const ExampleRecord& example, const IdfTable& idf);

struct PolicyParams {
  std::vector<double> w;

  static PolicyParams zeros(std::size_t dim = kFeatureDim) { return {std::vector<double>(dim, 0.0)}; }
  bool operator==(const PolicyParams&) const = default;
};

struct PolicyConfig {
  std::size_t m = 5;          // samples per example
  double threshold = 0.5;     // greedy inclusion threshold
  // Top-k sampling has no analog for independent token decisions; kept so
  // configs that set it are accepted.
  std::size_t top_k = 20;

  void validate() const;
};

struct RewriteCandidate {
  text::TokenSeq tokens;               // u_n tokens, then selected context tokens
  std::string text;                    // rendered rewrite
  std::vector<std::uint8_t> decisions; // one per candidate row
  double logprob = 0.0;
};

double sigmoid(double z);
double log_sigmoid(double z);

// sigmoid(w . phi_i) for every row. Throws on a dimension mismatch.
std::vector<double> inclusion_probabilities(const PolicyParams& params, const PolicyInput& input);

// Sum over rows of the Bernoulli log-likelihood of `decisions`.
double decisions_logprob(const PolicyParams& params, const PolicyInput& input,
                         std::span<const std::uint8_t> decisions);

// Renders a rewrite for the given decisions (logprob filled in).
RewriteCandidate make_rewrite(const PolicyParams& params, const PolicyInput& input,
                              std::vector<std::uint8_t> decisions);

// Keeps rows whose probability strictly exceeds `threshold`.
RewriteCandidate decode_threshold(const PolicyParams& params, const PolicyInput& input,
                                  double threshold);
RewriteCandidate greedy_rewrite(const PolicyParams& params, const PolicyInput& input,
                                double threshold = 0.5);

std::vector<RewriteCandidate> sample_rewrites(const PolicyParams& params, const PolicyInput& input,
                                              std::size_t m, Rng& rng);

// Gradient of decisions_logprob with respect to w.
std::vector<double> logprob_grad(const PolicyParams& params, const PolicyInput& input,
                                 std::span<const std::uint8_t> decisions);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Supervised objective: mean binary cross entropy of the keep decisions
// against targets y_i = [candidate i occurs in the human rewrite]. Rows-free
// inputs give zero loss and gradient.
LossGrad ce_loss_and_grad(const PolicyParams& params, const PolicyInput& input,
                          std::string_view human_rewrite);

// Checkpoint: "convqr-policy 1" header, feature names, threshold, weights.
std::string serialize_policy(const PolicyParams& params, double threshold = 0.5);
PolicyParams parse_policy(std::string_view content, double* threshold = nullptr);
void save_policy(const std::string& path, const PolicyParams& params, double threshold = 0.5);
PolicyParams load_policy(const std::string& path, double* threshold = nullptr);

}  // namespace convqr
