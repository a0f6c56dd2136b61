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


// Independent reference implementations used by the unit and acceptance
// tests. They trade speed for obviousness and share no code paths with the
// library beyond the tokenizer.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "convqr/corpus.hpp"
#include "convqr/retriever.hpp"
#include "convqr/text.hpp"

namespace convqr::oracle {

// Multiset overlap by counting.
inline std::size_t overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::string, long> count;
  for (const auto& t : a) ++count[t];
  std::size_t n = 0;
  for (const auto& t : b)
    if (count[t]-- > 0) ++n;
  return n;
}

struct Span {
  std::size_t start = 0;
  std::size_t length = 0;
  double f1 = 0.0;
};

// Tries every span; keeps the first (smallest start, then length) maximum.
inline Span best_span(const std::vector<std::string>& passage, const std::vector<std::string>& answer) {
  Span best;
  for (std::size_t s = 0; s < passage.size(); ++s) {
    for (std::size_t len = 1; s + len <= passage.size(); ++len) {
      std::vector<std::string> span(passage.begin() + s, passage.begin() + s + len);
      const std::size_t o = overlap(span, answer);
      const double f1 = o == 0 ? 0.0 : 2.0 * o / static_cast<double>(len + answer.size());
      if (f1 > best.f1) best = {s, len, f1};
    }
  }
  return best;
}

// Textbook Okapi BM25 over the analyzed corpus.
class Bm25 {
 public:
  Bm25(const Corpus& corpus, double k1 = 0.82, double b = 0.68) : k1_(k1), b_(b) {
    double total = 0.0;
    for (const auto& p : corpus.passages()) {
      docs_.push_back(analyze(p.text, kMaxPassageTokens));
      total += static_cast<double>(docs_.back().size());
      std::map<std::string, int> seen;
      for (const auto& t : docs_.back())
        if (seen[t]++ == 0) ++df_[t];
    }
    avg_ = total / static_cast<double>(docs_.size());
  }

  double score(const std::string& query, std::size_t d) const {
    const double n = static_cast<double>(docs_.size());
    const double norm = k1_ * (1.0 - b_ + b_ * static_cast<double>(docs_[d].size()) / avg_);
    double s = 0.0;
    for (const auto& q : analyze(query, kMaxQueryTokens)) {
      auto it = df_.find(q);
      if (it == df_.end()) continue;
      const double f = static_cast<double>(std::count(docs_[d].begin(), docs_[d].end(), q));
      if (f == 0.0) continue;
      const double df = it->second;
      const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
      s += idf * f * (k1_ + 1.0) / (f + norm);
    }
    return s;
  }

  std::size_t size() const { return docs_.size(); }
  const std::map<std::string, std::size_t>& df() const { return df_; }

 private:
  double k1_, b_, avg_ = 0.0;
  std::vector<text::TokenSeq> docs_;
  std::map<std::string, std::size_t> df_;
};

// Hashed bag-of-words cosine, rebuilt from document frequencies.
class Dense {
 public:
  Dense(const Corpus& corpus, std::size_t dim) : dim_(dim) {
    std::vector<text::TokenSeq> docs;
    for (const auto& p : corpus.passages()) {
      docs.push_back(analyze(p.text, kMaxPassageTokens));
      std::map<std::string, int> seen;
      for (const auto& t : docs.back())
        if (!text::is_stopword(t) && seen[t]++ == 0) ++df_[t];
    }
    n_ = docs.size();
    for (const auto& d : docs) vectors_.push_back(embed_tokens(d));
  }

  double score(const std::string& query, std::size_t d) const {
    const auto q = embed_tokens(analyze(query, kMaxQueryTokens));
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += q[i] * vectors_[d][i];
    return s;
  }

  std::size_t size() const { return vectors_.size(); }

 private:
  std::vector<double> embed_tokens(const text::TokenSeq& tokens) const {
    std::vector<double> v(dim_, 0.0);
    for (const auto& t : tokens) {
      if (text::is_stopword(t)) continue;
      auto it = df_.find(t);
      if (it == df_.end()) continue;
      const double n = static_cast<double>(n_), df = static_cast<double>(it->second);
      v[hash_bucket(t, dim_)] += hash_sign(t) * std::log((n - df + 0.5) / (df + 0.5) + 1.0);
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& x : v) x *= inv;
    }
    return v;
  }

  std::size_t dim_;
  std::size_t n_ = 0;
  std::map<std::string, std::size_t> df_;
  std::vector<std::vector<double>> vectors_;
};

// Scores every passage, sorts by (score desc, index asc), keeps k.
template <typename Scorer>
std::vector<Hit> exhaustive_top_k(const Scorer& scorer, const std::string& query, std::size_t k) {
  std::vector<Hit> hits;
  for (std::size_t d = 0; d < scorer.size(); ++d)
    hits.push_back({static_cast<DocIndex>(d), scorer.score(query, d)});
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc < b.doc;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

// Central differences of f at w with step h.
inline std::vector<double> numeric_grad(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> w, double h = 1e-5) {
  std::vector<double> g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double w0 = w[i];
    w[i] = w0 + h;
    const double up = f(w);
    w[i] = w0 - h;
    const double down = f(w);
    w[i] = w0;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||); absolute when both are tiny.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale < 1e-8 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

}  // namespace convqr::oracle
