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
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace convqr::text {

using TokenSeq = std::vector<std::string>;

// A token together with the byte range [begin, end) it covers in the source.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Lowercasing word tokenizer. Whitespace separates tokens; every ASCII
// punctuation character is emitted as its own token. Bytes >= 0x80 are
// treated as word characters so UTF-8 sequences stay intact.
std::vector<Token> tokenize_with_offsets(std::string_view text);
TokenSeq tokenize(std::string_view text);

// True for single-character ASCII punctuation tokens.
bool is_punctuation(std::string_view token);

// tokenize() with punctuation tokens removed. This is the analyzer used by
// the retrievers, the weak labeler and rewrite statistics.
TokenSeq content_tokens(std::string_view text);

// Multiset token-overlap F1. Zero when either side is empty.
double token_f1(std::span<const std::string> a, std::span<const std::string> b);

// Contiguous passage span with the best F1 against an answer.
struct SpanMatch {
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t overlap = 0;  // multiset intersection size with the answer
  double f1 = 0.0;
};

// Compares the F1 of two spans matched against an answer of answer_len
// tokens, exactly (integer cross-multiplication). Returns <0, 0, >0.
int compare_span_f1(const SpanMatch& a, const SpanMatch& b, std::size_t answer_len);

// Exhaustive best-span search. Among all spans with length in
// [1, max_span_len] (0 = unbounded) returns the maximal-F1 one, ties broken
// by smallest start, then smallest length. Empty passage -> {0, 0, 0, 0.0}.
//
// The search prunes a start position once no longer span can beat the
// current best, so the unbounded default is still exact and cheap.
SpanMatch best_span_f1(std::span<const std::string> passage,
                       std::span<const std::string> answer,
                       std::size_t max_span_len = 0);

// Membership in the embedded English stopword list (resources/stopwords.txt).
bool is_stopword(std::string_view token);
const std::vector<std::string>& stopwords();

// Joins tokens with single spaces.
std::string join(std::span<const std::string> tokens);

std::string_view trim(std::string_view s);

}  // namespace convqr::text
