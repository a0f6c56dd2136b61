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

#include <cstdio>
#include <filesystem>
#include <random>

#include "convqr/error.hpp"
#include "convqr/retriever.hpp"
#include "convqr/synth.hpp"
#include "oracles.hpp"

using namespace convqr;

namespace {

Corpus bench_corpus(std::size_t entities = 20) {
  SynthConfig c;
  c.n_entities = entities;
  c.n_dialogues = 2;
  c.n_test_dialogues = 1;
  return generate_benchmark(c).corpus;
}

std::vector<std::string> queries(const Corpus& corpus, std::size_t n, unsigned seed) {
  std::mt19937 gen(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = corpus[static_cast<DocIndex>(gen() % corpus.size())];
    const auto toks = text::tokenize(p.text);
    std::string q;
    for (int j = 1 + gen() % 5; j > 0; --j) q += toks[gen() % toks.size()] + " ";
    if (gen() % 4 == 0) q += "zzunseen";
    out.push_back(q);
  }
  return out;
}

}  // namespace

TEST_CASE("bm25 matches the textbook formula and exhaustive ranking") {
  const auto corpus = bench_corpus();
  const auto index = Bm25Index::build(corpus);
  const oracle::Bm25 ref(corpus);
  for (const auto& q : queries(corpus, 60, 3)) {
    const auto all = index.score_all(q);
    for (std::size_t d = 0; d < corpus.size(); ++d) REQUIRE(all[d] == ref.score(q, d));
    CHECK(index.retrieve(q, 15) == oracle::exhaustive_top_k(ref, q, 15));
  }
}

TEST_CASE("bm25 counts match a recount of the corpus") {
  const auto corpus = bench_corpus(10);
  const auto index = Bm25Index::build(corpus);
  const oracle::Bm25 ref(corpus);
  CHECK(index.num_terms() == ref.df().size());
  for (const auto& [term, df] : ref.df()) {
    auto t = index.term_id(term);
    REQUIRE(t);
    CHECK(index.postings(*t).size() == df);
  }
  double total = 0.0;
  for (DocIndex d = 0; d < corpus.size(); ++d) {
    const auto n = analyze(corpus[d].text, kMaxPassageTokens).size();
    CHECK(index.doc_length(d) == n);
    total += static_cast<double>(n);
  }
  CHECK(index.avg_length() == doctest::Approx(total / static_cast<double>(corpus.size())));
}

TEST_CASE("dense matches the reference embedding") {
  const auto corpus = bench_corpus();
  const auto index = DenseIndex::build(corpus, 64);
  const oracle::Dense ref(corpus, 64);
  for (const auto& q : queries(corpus, 40, 5)) {
    const auto all = index.score_all(q);
    for (std::size_t d = 0; d < corpus.size(); ++d) REQUIRE(all[d] == ref.score(q, d));
    CHECK(index.retrieve(q, 10) == oracle::exhaustive_top_k(ref, q, 10));
  }
  for (DocIndex d = 0; d < 5; ++d) {
    double n2 = 0.0;
    for (double x : index.vector(d)) n2 += x * x;
    CHECK(n2 == doctest::Approx(1.0));
  }
}

TEST_CASE("ties break on passage id") {
  Corpus c({{"p3", "a", "apple"}, {"p1", "b", "apple"}, {"p2", "c", "pear"}});
  const auto index = Bm25Index::build(c);
  const auto hits = index.retrieve("apple", 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].score == hits[1].score);
  CHECK(index.passage_id(hits[0].doc) == "p1");
  CHECK(index.passage_id(hits[1].doc) == "p3");
}

TEST_CASE("candidate restricted retrieval") {
  const auto corpus = bench_corpus(5);
  const auto index = Bm25Index::build(corpus);
  const std::vector<DocIndex> cand = {7, 3, 3, 20};
  const auto hits = index.retrieve("founder", cand, 10);
  CHECK(hits.size() == 3);
  for (const auto& h : hits) CHECK((h.doc == 3 || h.doc == 7 || h.doc == 20));
  CHECK_THROWS_AS(index.retrieve("x", std::span<const DocIndex>{}, 3), ValidationError);
  CHECK_THROWS_AS(index.retrieve("x", 0), ValidationError);
}

TEST_CASE("index files round trip") {
  const auto corpus = bench_corpus(6);
  const auto dir = std::filesystem::temp_directory_path() / "convqr_test_index";
  std::filesystem::create_directories(dir);
  for (auto kind : {RetrieverKind::bm25, RetrieverKind::dense}) {
    const auto built = build_retriever(corpus, kind, 32);
    const auto path = (dir / std::string(built->kind())).string();
    save_index(*built, path);
    const auto loaded = load_index(path);
    CHECK(loaded->kind() == built->kind());
    for (const auto& q : {"capital river", "founder of", "nothing"})
      CHECK(loaded->score_all(q) == built->score_all(q));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("idf formula") {
  CHECK(IdfTable::formula(10, 1) == doctest::Approx(std::log(9.5 / 1.5 + 1.0)));
  CHECK(IdfTable::formula(10, 10) > 0.0);
}
