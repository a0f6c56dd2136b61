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

#include <cmath>
#include <map>

#include "convqr/error.hpp"
#include "convqr/synth.hpp"
#include "convqr/weaksup.hpp"
#include "oracles.hpp"

using namespace convqr;

TEST_CASE("hard negatives split evenly between the pool and the corpus") {
  const std::vector<DocIndex> top = {2, 5, 9};  // 5 is the positive
  constexpr std::size_t kCorpus = 20, kDraws = 200000;
  std::map<DocIndex, std::size_t> count;
  Rng rng(42);
  for (std::size_t i = 0; i < kDraws; ++i) {
    const auto d = sample_hard_negative(5, top, kCorpus, rng);
    REQUIRE(d != 5);
    REQUIRE(d < kCorpus);
    ++count[d];
  }
  // Pool members: 1/2 * 1/2 + 1/2 * 1/19; others: 1/2 * 1/19.
  for (DocIndex d = 0; d < kCorpus; ++d) {
    if (d == 5) continue;
    const bool in_pool = d == 2 || d == 9;
    const double p = (in_pool ? 0.25 : 0.0) + 0.5 / 19.0;
    const double sd = std::sqrt(p * (1 - p) / kDraws);
    CHECK(std::abs(static_cast<double>(count[d]) / kDraws - p) < 5 * sd);
  }
}

TEST_CASE("hard negative falls back to the corpus") {
  Rng rng(1);
  const std::vector<DocIndex> only_positive = {3};
  for (int i = 0; i < 100; ++i) CHECK(sample_hard_negative(3, only_positive, 4, rng) != 3);
  CHECK_THROWS_AS(sample_hard_negative(0, only_positive, 1, rng), ValidationError);
}

TEST_CASE("candidate pool is the union of positives and negatives") {
  const std::vector<WeakLabel> batch = {{"a", 4, 1, 1.0, {}}, {"b", 1, 7, 1.0, {}}, {"c", 4, 2, 1.0, {}}};
  const auto pool = build_candidate_pool(batch);
  CHECK(pool.passages == std::vector<DocIndex>{1, 2, 4, 7});
  CHECK(pool.positives == std::vector<DocIndex>{4, 1, 4});
  CHECK(pool.contains(7));
  CHECK_FALSE(pool.contains(3));
}

TEST_CASE("labeler with a full pool equals brute force") {
  SynthConfig c;
  c.n_entities = 10;
  c.n_dialogues = 10;
  c.n_test_dialogues = 1;
  const auto bench = generate_benchmark(c);
  const auto index = Bm25Index::build(bench.corpus);
  const WeakLabeler labeler(bench.corpus, index);
  std::vector<text::TokenSeq> docs;
  for (const auto& p : bench.corpus.passages()) docs.push_back(analyze(p.text, kMaxPassageTokens));

  LabelingOptions opt;
  opt.pool_size = bench.corpus.size();
  const auto examples = explode_all(bench.train, false);
  const auto labels = labeler.label_all(examples, opt);
  REQUIRE(labels.size() == examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto answer = text::content_tokens(examples[i].answer);
    double best = -1.0;
    for (const auto& d : docs) best = std::max(best, oracle::best_span(d, answer).f1);
    CHECK(labels[i].f1 == best);
    CHECK(oracle::best_span(docs[labels[i].positive], answer).f1 == best);
  }
}

TEST_CASE("labels survive serialization") {
  Corpus corpus({{"p1", "a", "x"}, {"p2", "a", "y"}});
  const std::vector<WeakLabel> labels = {{"d_1", 0, 1, 0.5, QuerySource::dialogue_context}};
  const auto back = parse_weak_labels(serialize_weak_labels(labels, corpus), corpus);
  REQUIRE(back.size() == 1);
  CHECK(back[0].example_id == "d_1");
  CHECK(back[0].negative == 1);
  CHECK(back[0].source == QuerySource::dialogue_context);
  CHECK_THROWS_AS(parse_weak_labels(R"({"example_id":"x","positive":"p9"})", corpus), ValidationError);
}

TEST_CASE("tied passages are chosen uniformly by seed") {
  Corpus corpus({{"p1", "a", "The river is Oma."}, {"p2", "b", "The river is Oma."}, {"p3", "c", "Nothing here."}});
  const auto index = Bm25Index::build(corpus);
  const WeakLabeler labeler(corpus, index);
  const std::vector<DocIndex> all = {0, 1, 2};
  std::size_t first = 0;
  constexpr std::size_t kSeeds = 4000;
  for (std::size_t s = 0; s < kSeeds; ++s) {
    Rng rng(s);
    const auto label = labeler.best_passage(all, "Oma", rng);
    REQUIRE(label.n_tied == 2);
    REQUIRE(label.positive != 2);
    first += label.positive == 0;
  }
  CHECK(std::abs(static_cast<double>(first) / kSeeds - 0.5) < 0.03);
  Rng a(9), b(9);
  CHECK(labeler.best_passage(all, "Oma", a).positive == labeler.best_passage(all, "Oma", b).positive);
}
