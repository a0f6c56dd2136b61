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

#include "convqr/text.hpp"

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

namespace convqr::text {

namespace detail {
extern const std::string_view kStopwordData;
}  // namespace detail

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_punct_char(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

char lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

struct StopwordSet {
  std::vector<std::string> list;
  std::unordered_set<std::string_view> lookup;

  StopwordSet() {
    std::string_view data = detail::kStopwordData;
    while (!data.empty()) {
      auto nl = data.find('\n');
      std::string_view line = trim(data.substr(0, nl));
      if (!line.empty() && line.front() != '#') list.emplace_back(line);
      if (nl == std::string_view::npos) break;
      data.remove_prefix(nl + 1);
    }
    for (const auto& w : list) lookup.insert(w);
  }
};

const StopwordSet& stopword_set() {
  static const StopwordSet set;
  return set;
}

}  // namespace

std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<Token> tokenize_with_offsets(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
    } else if (is_punct_char(c)) {
      out.push_back({std::string(1, static_cast<char>(c)), i, i + 1});
      ++i;
    } else {
      Token tok;
      tok.begin = i;
      while (i < n) {
        auto d = static_cast<unsigned char>(text[i]);
        if (is_space(d) || is_punct_char(d)) break;
        tok.text.push_back(lower(d));
        ++i;
      }
      tok.end = i;
      out.push_back(std::move(tok));
    }
  }
  return out;
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.text));
  return out;
}

bool is_punctuation(std::string_view token) {
  return token.size() == 1 && is_punct_char(static_cast<unsigned char>(token[0]));
}

TokenSeq content_tokens(std::string_view text) {
  TokenSeq out = tokenize(text);
  std::erase_if(out, [](const std::string& t) { return is_punctuation(t); });
  return out;
}

double token_f1(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0.0;
  std::unordered_map<std::string_view, int> counts;
  for (const auto& t : b) ++counts[t];
  std::size_t overlap = 0;
  for (const auto& t : a) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  // 2PR/(P+R) with P = o/|a| and R = o/|b| simplifies to 2o/(|a|+|b|).
  return 2.0 * static_cast<double>(overlap) / static_cast<double>(a.size() + b.size());
}

int compare_span_f1(const SpanMatch& a, const SpanMatch& b, std::size_t answer_len) {
  // f1 = 2o / (len + |answer|)
  const std::uint64_t lhs = static_cast<std::uint64_t>(a.overlap) * (b.length + answer_len);
  const std::uint64_t rhs = static_cast<std::uint64_t>(b.overlap) * (a.length + answer_len);
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

SpanMatch best_span_f1(std::span<const std::string> passage,
                       std::span<const std::string> answer, std::size_t max_span_len) {
  SpanMatch best;
  const std::size_t n = passage.size();
  const std::size_t a_len = answer.size();
  if (n == 0 || a_len == 0) return best;
  const std::size_t cap = max_span_len == 0 ? n : std::min(max_span_len, n);

  // Map answer types to dense ids with their multiplicities.
  std::unordered_map<std::string_view, std::uint32_t> type_of;
  std::vector<std::uint32_t> budget;
  for (const auto& t : answer) {
    auto [it, inserted] = type_of.try_emplace(t, static_cast<std::uint32_t>(budget.size()));
    if (inserted) budget.push_back(0);
    ++budget[it->second];
  }
  constexpr std::uint32_t kNone = UINT32_MAX;
  std::vector<std::uint32_t> ids(n, kNone);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    auto it = type_of.find(passage[i]);
    if (it != type_of.end()) {
      ids[i] = it->second;
      any = true;
    }
  }

  best.start = 0;
  best.length = 1;
  best.overlap = 0;
  if (!any) return best;

  std::vector<std::uint32_t> used(budget.size(), 0);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(used.begin(), used.end(), 0);
    std::size_t overlap = 0;
    const std::size_t max_len = std::min(cap, n - s);
    for (std::size_t len = 1; len <= max_len; ++len) {
      const std::uint32_t id = ids[s + len - 1];
      if (id != kNone && used[id] < budget[id]) {
        ++used[id];
        ++overlap;
      }
      SpanMatch cand{s, len, overlap, 0.0};
      if (compare_span_f1(cand, best, a_len) > 0) best = cand;
      // Any longer span from s has f1 <= 2*|answer| / (len + 1 + |answer|).
      SpanMatch bound{s, len + 1, a_len, 0.0};
      if (best.overlap > 0 && compare_span_f1(bound, best, a_len) <= 0) break;
    }
  }
  best.f1 = 2.0 * static_cast<double>(best.overlap) /
            static_cast<double>(best.length + a_len);
  return best;
}

bool is_stopword(std::string_view token) {
  return stopword_set().lookup.contains(token);
}

const std::vector<std::string>& stopwords() { return stopword_set().list; }

std::string join(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace convqr::text
