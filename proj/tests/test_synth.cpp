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

#include <filesystem>
#include <set>

#include "convqr/error.hpp"
#include "convqr/synth.hpp"

using namespace convqr;

namespace {

SynthConfig small() {
  SynthConfig c;
  c.n_entities = 15;
  c.n_dialogues = 20;
  c.n_test_dialogues = 10;
  c.nogold_prob = 0.2;
  return c;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  const auto a = generate_benchmark(small());
  const auto b = generate_benchmark(small());
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.test_qrels == b.test_qrels);
  auto c = small();
  c.seed = 8;
  CHECK(generate_benchmark(c).train != a.train);
}

TEST_CASE("answers are verbatim sentences of the gold passage") {
  const auto bench = generate_benchmark(small());
  CHECK(bench.corpus.size() == 15 * 8);
  for (const auto& d : bench.train) {
    validate_dialogue(d);
    CHECK(d.turns.size() == 12);
    for (const auto& [turn, gold] : d.gold) {
      REQUIRE(gold.size() == 1);
      const auto& passage = bench.corpus[bench.corpus.at(gold[0])];
      CHECK(passage.text.find(d.turns[turn + 1].text) != std::string::npos);
      // The rewrite names the entity the passage belongs to.
      CHECK(d.rewrites.at(turn).find(passage.doc_id) != std::string::npos);
    }
  }
}

TEST_CASE("test qrels cover every test question") {
  const auto bench = generate_benchmark(small());
  std::size_t no_gold = 0, total = 0;
  for (const auto& d : bench.test)
    for (const auto& e : explode_examples(d, false)) {
      ++total;
      REQUIRE(bench.test_qrels.count(e.id()));
      const auto& g = bench.test_qrels.at(e.id());
      CHECK(g.size() == e.gold.size());
      no_gold += g.empty();
    }
  CHECK(total == 60);
  CHECK(no_gold > 0);
  CHECK(no_gold < total);
}

TEST_CASE("follow-ups use pronouns") {
  const auto bench = generate_benchmark(small());
  std::size_t pronoun = 0, follow_ups = 0;
  for (const auto& d : bench.train)
    for (std::size_t t = 2; t < d.turns.size(); t += 2) {
      ++follow_ups;
      pronoun += d.turns[t].text.find(" its ") != std::string::npos;
    }
  const double share = static_cast<double>(pronoun) / follow_ups;
  CHECK(share > 0.5);
  CHECK(share < 0.8);
}

TEST_CASE("config validation") {
  auto c = small();
  c.n_entities = synth_name_pool_size() + 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = small();
  c.facts_per_entity = synth_attribute_count() + 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = small();
  c.shift_prob = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("benchmark files load back") {
  const auto dir = std::filesystem::temp_directory_path() / "convqr_test_synth";
  const auto bench = generate_benchmark(small());
  write_benchmark(dir.string(), bench, small());
  CHECK(load_passages((dir / "passages.jsonl").string()).passages().size() == bench.corpus.size());
  CHECK(load_dialogues((dir / "test.jsonl").string()) == bench.test);
  CHECK(load_qrels((dir / "qrels.txt").string()) == bench.test_qrels);
  std::filesystem::remove_all(dir);
}
