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


#include <doctest.h>

#include <random>

#include "convqr/text.hpp"
#include "oracles.hpp"

using namespace convqr;

TEST_CASE("tokenizer lowercases and splits punctuation") {
  const auto t = text::tokenize("Who made it? The CEO's team, 2019.");
  const text::TokenSeq want = {"who", "made", "it", "?", "the", "ceo", "'", "s", "team", ",", "2019", "."};
  CHECK(t == want);
  CHECK(text::content_tokens("Who made it?") == text::TokenSeq{"who", "made", "it"});
  CHECK(text::tokenize("   ").empty());
}

TEST_CASE("offsets cover the source bytes") {
  const std::string s = "  Héllo,  wörld ";
  for (const auto& tok : text::tokenize_with_offsets(s)) {
    std::string raw = s.substr(tok.begin, tok.end - tok.begin);
    CHECK(text::tokenize(raw) == text::TokenSeq{tok.text});
  }
}

TEST_CASE("token f1") {
  const text::TokenSeq a = {"a", "b", "b", "c"}, b = {"b", "b", "d"};
  CHECK(text::token_f1(a, b) == doctest::Approx(2.0 * 2 / 7));
  CHECK(text::token_f1(a, {}) == 0.0);
}

TEST_CASE("best span agrees with exhaustive search") {
  std::mt19937 gen(11);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f"};
  for (int trial = 0; trial < 400; ++trial) {
    std::uniform_int_distribution<int> len(0, 25), alen(1, 6), word(0, 5);
    text::TokenSeq passage, answer;
    for (int i = len(gen); i > 0; --i) passage.push_back(vocab[word(gen)]);
    for (int i = alen(gen); i > 0; --i) answer.push_back(vocab[word(gen)]);
    const auto want = oracle::best_span(passage, answer);
    const auto got = text::best_span_f1(passage, answer);
    REQUIRE(got.f1 == want.f1);
    if (want.f1 > 0.0) {
      CHECK(got.start == want.start);
      CHECK(got.length == want.length);
    }
  }
}

TEST_CASE("span length cap") {
  const text::TokenSeq passage = {"x", "a", "b", "c", "y"}, answer = {"a", "b", "c"};
  CHECK(text::best_span_f1(passage, answer).f1 == 1.0);
  const auto capped = text::best_span_f1(passage, answer, 2);
  CHECK(capped.length == 2);
  CHECK(capped.f1 == doctest::Approx(0.8));
}

TEST_CASE("stopwords") {
  CHECK(text::is_stopword("the"));
  CHECK(text::is_stopword("its"));
  CHECK_FALSE(text::is_stopword("river"));
  CHECK(!text::stopwords().empty());
}
