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


#include "convqr/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <string_view>

#include <json.hpp>

#include "convqr/error.hpp"
#include "convqr/rng.hpp"

namespace convqr {

namespace {

constexpr std::array<std::string_view, 16> kNamePrefixes = {
    "Var", "Kel", "Zor", "Mal", "Tis", "Bren", "Dra", "Fen",
    "Gor", "Hal", "Jor", "Lun", "Mor", "Nes", "Quil", "Ros"};
constexpr std::array<std::string_view, 15> kNameSuffixes = {
    "ath", "enor", "ia", "ovar", "undra", "eth", "is", "olin",
    "ara", "ux", "emor", "ith", "ona", "avel", "iry"};

// Syllables for attribute values; disjoint in spirit from the name pool.
constexpr std::array<std::string_view, 16> kValueSyllables = {
    "ka", "lo", "mi", "ze", "tu", "ri", "vo", "pa",
    "ne", "shi", "do", "gu", "fa", "be", "xo", "yi"};

enum class ValueKind { year, count, place, person, word, meters };

struct Attribute {
  std::string_view name;
  ValueKind kind;
};

constexpr std::array<Attribute, 8> kAttributes = {{
    {"founding year", ValueKind::year},
    {"population", ValueKind::count},
    {"capital", ValueKind::place},
    {"founder", ValueKind::person},
    {"main export", ValueKind::word},
    {"largest river", ValueKind::place},
    {"elevation", ValueKind::meters},
    {"patron saint", ValueKind::person},
}};

constexpr std::array<std::string_view, 4> kFillers = {
    "Chroniclers of {N} record the {A} alongside other civic details.",
    "Visitors to {N} often ask about the {A}.",
    "The {A} has been part of local records in {N} for generations, and travel guides repeat it.",
    "Archives in {N} confirm this.",
};

std::string fill(std::string_view tmpl, std::string_view name, std::string_view attr) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl.substr(i, 3) == "{N}") {
      out += name;
      i += 2;
    } else if (tmpl.substr(i, 3) == "{A}") {
      out += attr;
      i += 2;
    } else {
      out.push_back(tmpl[i]);
    }
  }
  return out;
}

std::vector<std::string> name_pool() {
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (auto p : kNamePrefixes)
    for (auto s : kNameSuffixes) {
      std::string n = std::string(p) + std::string(s);
      if (seen.insert(n).second) names.push_back(std::move(n));
    }
  return names;
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

// Draws values that are unique across the whole benchmark.
class ValueSource {
 public:
  explicit ValueSource(std::uint64_t seed) : rng_(seed) {}

  std::string draw(ValueKind kind) {
    for (;;) {
      std::string v = candidate(kind);
      if (used_.insert(v).second) return v;
    }
  }

 private:
  std::string word(std::size_t syllables) {
    std::string w;
    for (std::size_t i = 0; i < syllables; ++i) w += kValueSyllables[rng_.uniform_index(kValueSyllables.size())];
    return w;
  }

  std::string candidate(ValueKind kind) {
    switch (kind) {
      case ValueKind::year: return std::to_string(1100 + rng_.uniform_index(900));
      case ValueKind::count: return std::to_string(1000 + rng_.uniform_index(99000));
      case ValueKind::place: return capitalize(word(3));
      case ValueKind::person: return capitalize(word(2)) + " " + capitalize(word(3));
      case ValueKind::word: return word(3);
      case ValueKind::meters: return std::to_string(100 + rng_.uniform_index(4900)) + " meters";
    }
    return {};
  }

  Rng rng_;
  std::set<std::string> used_;
};

std::string padded(char prefix, std::size_t i, std::size_t total) {
  const int width = static_cast<int>(std::to_string(total).size());
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
  return buf;
}

constexpr std::uint64_t kNameStream = 1;
constexpr std::uint64_t kValueStream = 2;
constexpr std::uint64_t kTrainStream = 3;
constexpr std::uint64_t kTestStream = 4;

struct World {
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> values;  // [entity][attribute]
  std::vector<std::vector<std::string>> pids;    // [entity][attribute]
};

std::string statement(const World& w, std::size_t e, std::size_t a) {
  return "The " + std::string(kAttributes[a].name) + " of " + w.names[e] + " is " + w.values[e][a];
}

std::string explicit_question(const World& w, std::size_t e, std::size_t a) {
  return "What is the " + std::string(kAttributes[a].name) + " of " + w.names[e] + "?";
}

Dialogue make_dialogue(const World& w, const SynthConfig& cfg, const std::string& id, Rng& rng,
                       bool drop_gold) {
  Dialogue d;
  d.id = id;
  const std::size_t n_ent = w.names.size();
  const std::size_t n_attr = cfg.facts_per_entity;
  std::size_t entity = rng.uniform_index(n_ent);
  std::vector<std::vector<bool>> asked(n_ent);
  bool shifted = false;
  for (std::size_t t = 0; t < cfg.turns; ++t) {
    bool named = true;
    if (t > 0) {
      if (n_ent > 1 && rng.bernoulli(cfg.shift_prob)) {
        std::size_t next = rng.uniform_index(n_ent - 1);
        entity = next >= entity ? next + 1 : next;
        shifted = true;
      } else if (rng.bernoulli(cfg.pronoun_prob)) {
        named = false;
      }
    }
    auto& seen = asked[entity];
    if (seen.empty()) seen.assign(n_attr, false);
    std::vector<std::size_t> open;
    for (std::size_t a = 0; a < n_attr; ++a)
      if (!seen[a]) open.push_back(a);
    const std::size_t attr = open.empty() ? rng.uniform_index(n_attr) : open[rng.uniform_index(open.size())];
    seen[attr] = true;

    const std::string attr_name(kAttributes[attr].name);
    std::string question = explicit_question(w, entity, attr);
    if (!named) {
      switch (rng.uniform_index(3)) {
        case 0: question = "What about its " + attr_name + "?"; break;
        case 1: question = "And its " + attr_name + "?"; break;
        default: question = "What is its " + attr_name + "?"; break;
      }
    }
    const std::size_t key = d.turns.size();
    d.turns.push_back({Role::user, question});
    d.turns.push_back({Role::agent, statement(w, entity, attr) + "."});
    d.rewrites[key] = explicit_question(w, entity, attr);
    if (!(drop_gold && rng.bernoulli(cfg.nogold_prob))) d.gold[key] = {w.pids[entity][attr]};
  }
  d.subset = shifted ? "shifted" : "steady";
  return d;
}

}  // namespace

std::size_t synth_name_pool_size() { return name_pool().size(); }
std::size_t synth_attribute_count() { return kAttributes.size(); }

void SynthConfig::validate() const {
  if (n_entities < 1) throw ValidationError("synth: need at least 1 entity");
  if (n_entities > synth_name_pool_size())
    throw ValidationError("synth: " + std::to_string(n_entities) + " entities requested but the name pool has " +
                          std::to_string(synth_name_pool_size()));
  if (facts_per_entity < 1 || facts_per_entity > kAttributes.size())
    throw ValidationError("synth: facts per entity must lie in [1, " + std::to_string(kAttributes.size()) + "]");
  if (n_dialogues < 1) throw ValidationError("synth: need at least 1 training dialogue");
  if (turns < 1) throw ValidationError("synth: need at least 1 turn per dialogue");
  for (double p : {shift_prob, pronoun_prob, nogold_prob})
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("synth: probabilities must lie in [0, 1]");
}

SynthBenchmark generate_benchmark(const SynthConfig& config) {
  config.validate();
  World w;
  auto pool = name_pool();
  Rng name_rng(derive_seed(config.seed, kNameStream));
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[name_rng.uniform_index(i)]);
  w.names.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(config.n_entities));

  ValueSource values(derive_seed(config.seed, kValueStream));
  Rng filler_rng(derive_seed(config.seed, kValueStream, 1));
  const std::size_t n_passages = config.n_entities * config.facts_per_entity;
  std::vector<Passage> passages;
  w.values.resize(config.n_entities);
  w.pids.resize(config.n_entities);
  for (std::size_t e = 0; e < config.n_entities; ++e) {
    for (std::size_t a = 0; a < config.facts_per_entity; ++a) {
      w.values[e].push_back(values.draw(kAttributes[a].kind));
      w.pids[e].push_back(padded('p', e * config.facts_per_entity + a, n_passages));
      const auto filler = fill(kFillers[filler_rng.uniform_index(kFillers.size())], w.names[e],
                               kAttributes[a].name);
      passages.push_back({w.pids[e][a], w.names[e], statement(w, e, a) + ". " + filler});
    }
  }

  SynthBenchmark bench;
  bench.corpus = Corpus(std::move(passages));
  for (std::size_t i = 0; i < config.n_dialogues; ++i) {
    Rng rng(derive_seed(config.seed, kTrainStream, i));
    bench.train.push_back(make_dialogue(w, config, padded('d', i, config.n_dialogues), rng, false));
  }
  for (std::size_t i = 0; i < config.n_test_dialogues; ++i) {
    Rng rng(derive_seed(config.seed, kTestStream, i));
    bench.test.push_back(make_dialogue(w, config, padded('t', i, config.n_test_dialogues), rng, true));
  }
  for (const auto& d : bench.test) {
    for (const auto& ex : explode_examples(d, false)) {
      auto& gold = bench.test_qrels[ex.id()];
      gold.insert(ex.gold.begin(), ex.gold.end());
    }
  }
  return bench;
}

std::string serialize_synth_config(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["entities"] = c.n_entities;
  j["facts"] = c.facts_per_entity;
  j["dialogues"] = c.n_dialogues;
  j["test_dialogues"] = c.n_test_dialogues;
  j["turns"] = c.turns;
  j["shift_prob"] = c.shift_prob;
  j["pronoun_prob"] = c.pronoun_prob;
  j["nogold_prob"] = c.nogold_prob;
  j["seed"] = c.seed;
  return j.dump(2) + '\n';
}

void write_benchmark(const std::string& dir, const SynthBenchmark& bench, const SynthConfig& config) {
  write_passages(dir + "/passages.jsonl", bench.corpus);
  write_dialogues(dir + "/dialogues.jsonl", bench.train);
  write_dialogues(dir + "/test.jsonl", bench.test);
  write_qrels(dir + "/qrels.txt", bench.test_qrels);
  write_file_atomic(dir + "/synth_config.json", serialize_synth_config(config));
}

}  // namespace convqr
