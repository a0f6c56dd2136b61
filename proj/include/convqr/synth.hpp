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


// Deterministic synthetic conversational QA benchmark.
//
// Every entity owns one passage per attribute ("The founder of Varath is
// Kolomi Zetura. ..."). A dialogue opens with a fully specified question
// about one entity; follow-ups either name the entity again or refer to it
// with "its", and occasionally jump to another entity (always named). Agent
// answers are verbatim sentences of the gold passage and the human rewrite
// is the question with the entity named.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "convqr/corpus.hpp"
#include "convqr/eval.hpp"

namespace convqr {

struct SynthConfig {
  std::size_t n_entities = 50;
  std::size_t facts_per_entity = 8;
  std::size_t n_dialogues = 300;       // training dialogues
  std::size_t n_test_dialogues = 100;
  std::size_t turns = 6;               // user questions per dialogue
  double shift_prob = 0.2;
  double pronoun_prob = 0.8;
  double nogold_prob = 0.0;            // test turns left without gold
  std::uint64_t seed = 7;

  void validate() const;
};

// Size of the entity name pool.
std::size_t synth_name_pool_size();
// Number of attribute templates (the cap on facts_per_entity).
std::size_t synth_attribute_count();

struct SynthBenchmark {
  Corpus corpus;
  std::vector<Dialogue> train;
  std::vector<Dialogue> test;
  Qrels test_qrels;
};

SynthBenchmark generate_benchmark(const SynthConfig& config);

std::string serialize_synth_config(const SynthConfig& config);

// Writes passages.jsonl, dialogues.jsonl, test.jsonl, qrels.txt and
// synth_config.json under `dir`.
void write_benchmark(const std::string& dir, const SynthBenchmark& bench, const SynthConfig& config);

}  // namespace convqr
