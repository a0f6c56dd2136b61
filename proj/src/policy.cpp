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

#include "convqr/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "convqr/error.hpp"
#include "convqr/text.hpp"

namespace convqr {

namespace {

constexpr std::string_view kPolicyMagic = "convqr-policy";

bool is_upper(unsigned char c) { return c >= 'A' && c <= 'Z'; }

bool ends_sentence(std::string_view tok) { return tok == "." || tok == "?" || tok == "!"; }

double dot(std::span<const double> w, std::span<const double> phi) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * phi[i];
  return s;
}

void check_dim(const PolicyParams& params, const PolicyInput& input) {
  if (params.w.size() != kFeatureDim || (input.features.rows() && input.features.cols() != params.w.size()))
    throw ValidationError("policy: parameter dimension " + std::to_string(params.w.size()) +
                          " does not match feature dimension " + std::to_string(kFeatureDim));
}

void check_decisions(const PolicyInput& input, std::span<const std::uint8_t> decisions) {
  if (decisions.size() != input.features.rows())
    throw ValidationError("policy: " + std::to_string(decisions.size()) + " decisions for " +
                          std::to_string(input.features.rows()) + " candidate tokens");
}

}  // namespace

const std::array<std::string_view, kFeatureDim>& feature_names() {
  static const std::array<std::string_view, kFeatureDim> names = {
      "bias", "idf", "recency", "capitalized", "in_prev_question", "tf_log", "stopword",
      "question_overlap"};
  return names;
}

void PolicyConfig::validate() const {
  if (m < 1) throw ValidationError("policy: m must be at least 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("policy: threshold must lie in (0, 1)");
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) {
  if (z >= 0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

PolicyInput featurize(const ExampleRecord& example, const IdfTable& idf) {
  PolicyInput input;
  input.question = std::string(text::trim(example.question));
  input.question_tokens = text::tokenize(input.question);

  const auto question_content = text::content_tokens(input.question);
  const std::unordered_set<std::string> in_question(question_content.begin(), question_content.end());
  std::unordered_set<std::string> question_words;
  for (const auto& t : question_content)
    if (!text::is_stopword(t)) question_words.insert(t);

  struct Stats {
    std::size_t last_turn = 0;  // 1-based position in the context
    std::size_t tf = 0;
    bool capitalized = false;
    bool in_prev_question = false;
    bool question_overlap = false;
  };
  std::unordered_map<std::string, Stats> stats;
  const std::size_t n_ctx = example.context.size();

  for (std::size_t j = 0; j < n_ctx; ++j) {
    const auto& utt = example.context[j];
    const auto tokens = text::tokenize_with_offsets(utt.text);
    bool overlaps = false;
    for (const auto& t : tokens)
      if (question_words.contains(t.text)) overlaps = true;

    bool sentence_start = true;
    for (const auto& t : tokens) {
      if (text::is_punctuation(t.text)) {
        if (ends_sentence(t.text)) sentence_start = true;
        continue;
      }
      const bool starts_upper = is_upper(static_cast<unsigned char>(utt.text[t.begin]));
      const bool was_start = sentence_start;
      sentence_start = false;
      if (in_question.contains(t.text)) continue;
      auto [it, inserted] = stats.try_emplace(t.text);
      if (inserted) input.candidates.push_back(t.text);
      auto& s = it->second;
      s.last_turn = j + 1;
      ++s.tf;
      if (starts_upper && !was_start) s.capitalized = true;
      if (utt.role == Role::user) s.in_prev_question = true;
      if (overlaps) s.question_overlap = true;
    }
  }

  input.features = FeatureMatrix(input.candidates.size(), kFeatureDim);
  const double max_idf = idf.max_idf();
  for (std::size_t r = 0; r < input.candidates.size(); ++r) {
    const auto& tok = input.candidates[r];
    const auto& s = stats.at(tok);
    auto row = input.features.row(r);
    row[kBias] = 1.0;
    const auto v = idf.idf(tok);
    row[kIdf] = (v && max_idf > 0.0) ? *v / max_idf : 0.0;
    row[kRecency] = 1.0 / static_cast<double>(n_ctx + 1 - s.last_turn);
    row[kCapitalized] = s.capitalized ? 1.0 : 0.0;
    row[kInPrevQuestion] = s.in_prev_question ? 1.0 : 0.0;
    const double ltf = std::log1p(static_cast<double>(s.tf));
    row[kTermFrequency] = ltf / (1.0 + ltf);
    row[kStopword] = text::is_stopword(tok) ? 1.0 : 0.0;
    row[kQuestionOverlap] = s.question_overlap ? 1.0 : 0.0;
  }
  return input;
}

std::vector<double> inclusion_probabilities(const PolicyParams& params, const PolicyInput& input) {
  check_dim(params, input);
  std::vector<double> p(input.features.rows());
  for (std::size_t r = 0; r < p.size(); ++r) p[r] = sigmoid(dot(params.w, input.features.row(r)));
  return p;
}

double decisions_logprob(const PolicyParams& params, const PolicyInput& input,
                         std::span<const std::uint8_t> decisions) {
  check_dim(params, input);
  check_decisions(input, decisions);
  double lp = 0.0;
  for (std::size_t r = 0; r < decisions.size(); ++r) {
    const double z = dot(params.w, input.features.row(r));
    lp += decisions[r] ? log_sigmoid(z) : log_sigmoid(-z);
  }
  return lp;
}

RewriteCandidate make_rewrite(const PolicyParams& params, const PolicyInput& input,
                              std::vector<std::uint8_t> decisions) {
  RewriteCandidate c;
  c.logprob = decisions_logprob(params, input, decisions);
  c.tokens = input.question_tokens;
  c.text = input.question;
  for (std::size_t r = 0; r < decisions.size(); ++r) {
    if (!decisions[r]) continue;
    c.tokens.push_back(input.candidates[r]);
    if (!c.text.empty()) c.text.push_back(' ');
    c.text += input.candidates[r];
  }
  c.decisions = std::move(decisions);
  return c;
}

RewriteCandidate decode_threshold(const PolicyParams& params, const PolicyInput& input,
                                  double threshold) {
  const auto p = inclusion_probabilities(params, input);
  std::vector<std::uint8_t> d(p.size());
  for (std::size_t r = 0; r < p.size(); ++r) d[r] = p[r] > threshold ? 1 : 0;
  return make_rewrite(params, input, std::move(d));
}

RewriteCandidate greedy_rewrite(const PolicyParams& params, const PolicyInput& input,
                                double threshold) {
  return decode_threshold(params, input, threshold);
}

std::vector<RewriteCandidate> sample_rewrites(const PolicyParams& params, const PolicyInput& input,
                                              std::size_t m, Rng& rng) {
  if (m < 1) throw ValidationError("policy: m must be at least 1");
  const auto p = inclusion_probabilities(params, input);
  std::vector<RewriteCandidate> out;
  out.reserve(m);
  for (std::size_t s = 0; s < m; ++s) {
    std::vector<std::uint8_t> d(p.size());
    for (std::size_t r = 0; r < p.size(); ++r) d[r] = rng.bernoulli(p[r]) ? 1 : 0;
    out.push_back(make_rewrite(params, input, std::move(d)));
  }
  return out;
}

std::vector<double> logprob_grad(const PolicyParams& params, const PolicyInput& input,
                                 std::span<const std::uint8_t> decisions) {
  check_dim(params, input);
  check_decisions(input, decisions);
  std::vector<double> g(params.w.size(), 0.0);
  for (std::size_t r = 0; r < decisions.size(); ++r) {
    const auto phi = input.features.row(r);
    const double coef = (decisions[r] ? 1.0 : 0.0) - sigmoid(dot(params.w, phi));
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += coef * phi[k];
  }
  return g;
}

LossGrad ce_loss_and_grad(const PolicyParams& params, const PolicyInput& input,
                          std::string_view human_rewrite) {
  check_dim(params, input);
  const auto target_tokens = text::content_tokens(human_rewrite);
  const std::unordered_set<std::string> targets(target_tokens.begin(), target_tokens.end());
  LossGrad out{0.0, std::vector<double>(params.w.size(), 0.0)};
  const std::size_t n = input.features.rows();
  if (n == 0) return out;
  for (std::size_t r = 0; r < n; ++r) {
    const auto phi = input.features.row(r);
    const double z = dot(params.w, phi);
    const bool y = targets.contains(input.candidates[r]);
    out.loss -= y ? log_sigmoid(z) : log_sigmoid(-z);
    const double coef = sigmoid(z) - (y ? 1.0 : 0.0);
    for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += coef * phi[k];
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.loss *= inv;
  for (double& g : out.grad) g *= inv;
  return out;
}

// ---------------------------------------------------------------------------

std::string serialize_policy(const PolicyParams& params, double threshold) {
  std::ostringstream out;
  char buf[40];
  out << kPolicyMagic << " 1\n";
  out << "features " << params.w.size();
  for (auto name : feature_names()) out << ' ' << name;
  out << '\n';
  std::snprintf(buf, sizeof(buf), "%.17g", threshold);
  out << "threshold " << buf << '\n';
  out << "weights";
  for (double w : params.w) {
    std::snprintf(buf, sizeof(buf), "%.17g", w);
    out << ' ' << buf;
  }
  out << '\n';
  return out.str();
}

PolicyParams parse_policy(std::string_view content, double* threshold) {
  auto fail = [](const std::string& what) -> void {
    throw ValidationError("policy checkpoint: " + what);
  };
  std::istringstream in{std::string(content)};
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kPolicyMagic) fail("not a convqr policy file");
  if (version != 1) fail("unsupported version " + std::to_string(version));

  std::string key;
  std::size_t dim = 0;
  in >> key >> dim;
  if (key != "features" || dim != kFeatureDim)
    fail("expected 'features " + std::to_string(kFeatureDim) + "'");
  for (std::size_t i = 0; i < dim; ++i) {
    std::string name;
    in >> name;
    if (name != feature_names()[i]) fail("feature " + std::to_string(i) + " is '" + name + "'");
  }
  double thr = 0.5;
  in >> key >> thr;
  if (key != "threshold" || !(thr > 0.0 && thr < 1.0)) fail("bad threshold record");
  in >> key;
  if (key != "weights") fail("missing weights");
  PolicyParams params;
  for (std::size_t i = 0; i < dim; ++i) {
    std::string tok;
    in >> tok;
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(v))
      fail("weight " + std::to_string(i) + " is not a finite number");
    params.w.push_back(v);
  }
  if (threshold) *threshold = thr;
  return params;
}

void save_policy(const std::string& path, const PolicyParams& params, double threshold) {
  write_file_atomic(path, serialize_policy(params, threshold));
}

PolicyParams load_policy(const std::string& path, double* threshold) {
  return parse_policy(read_file(path), threshold);
}

}  // namespace convqr
