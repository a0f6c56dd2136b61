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

#include "convqr/corpus.hpp"
#include "convqr/error.hpp"

using namespace convqr;

namespace {

Dialogue sample_dialogue() {
  Dialogue d;
  d.id = "d1";
  d.turns = {{Role::user, "What is X?"}, {Role::agent, "X is Y."}, {Role::user, "Who made it?"},
             {Role::agent, "Z made it."}};
  d.rewrites = {{0, "What is X?"}, {2, "Who made X?"}};
  d.gold = {{0, {"p1"}}, {2, {"p2", "p3"}}};
  d.subset = "steady";
  return d;
}

}  // namespace

TEST_CASE("dialogue json round trip") {
  const auto d = sample_dialogue();
  CHECK(parse_dialogue(serialize_dialogue(d), 1) == d);
}

TEST_CASE("dialogue validation") {
  auto d = sample_dialogue();
  d.turns[1].role = Role::user;
  CHECK_THROWS_AS(validate_dialogue(d), ValidationError);
  d = sample_dialogue();
  d.turns[2].text = "  ";
  CHECK_THROWS_AS(validate_dialogue(d), ValidationError);
  CHECK_THROWS_AS(parse_dialogue("{not json", 3), ValidationError);
}

TEST_CASE("examples carry context, answer and labels") {
  const auto ex = explode_examples(sample_dialogue(), false);
  REQUIRE(ex.size() == 2);
  CHECK(ex[0].id() == "d1_1");
  CHECK(ex[1].id() == "d1_2");
  CHECK(ex[1].context.size() == 2);
  CHECK(ex[1].answer == "Z made it.");
  CHECK(*ex[1].human_rewrite == "Who made X?");
  CHECK(ex[1].gold == std::vector<std::string>{"p2", "p3"});
}

TEST_CASE("context string runs newest first") {
  Dialogue d;
  d.id = "d";
  d.turns = {{Role::user, "What is X?"}, {Role::agent, "X is Y."}, {Role::user, "Who made it?"}};
  const auto ex = explode_examples(d, false);
  CHECK(build_context_string(ex[1]) == "Who made it? [SEP] X is Y. [SEP] What is X?");
  // Four question tokens leave room for three of the answer's four.
  CHECK(build_context_string(ex[1], 7) == "Who made it? [SEP] X is Y");
  CHECK(build_context_string(ex[1], 2) == "Who made it?");
}

TEST_CASE("first question replacement") {
  Dialogue d = sample_dialogue();
  d.turns[0].text = "What is it?";
  std::size_t missing = 0;
  auto ex = explode_examples(d, true, &missing);
  CHECK(ex[0].question == "What is X?");
  CHECK(missing == 0);
  d.rewrites.erase(0);
  ex = explode_examples(d, true, &missing);
  CHECK(ex[0].question == "What is it?");
  CHECK(missing == 1);
}

TEST_CASE("corpus sorted and unique") {
  Corpus c({{"p2", "b", "two"}, {"p1", "a", "one"}});
  CHECK(c[0].id == "p1");
  CHECK(c.at("p2") == 1);
  CHECK_FALSE(c.find("p3"));
  CHECK_THROWS_AS(c.at("p3"), ValidationError);
  CHECK_THROWS_AS(Corpus({{"p1", "a", "x"}, {"p1", "b", "y"}}), ValidationError);
}

TEST_CASE("split lines keeps blanks") {
  const auto lines = split_lines("a\n\nb\r\n");
  REQUIRE(lines.size() == 3);
  CHECK(lines[1].empty());
  CHECK(lines[2] == "b");
}
