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
#include <random>

#include "convqr/error.hpp"
#include "convqr/policy.hpp"
#include "convqr/synth.hpp"
#include "oracles.hpp"

using namespace convqr;

namespace {

PolicyInput random_input(std::mt19937_64& gen, std::size_t rows) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PolicyInput in;
  in.question = "what about it";
  in.question_tokens = text::tokenize(in.question);
  in.features = FeatureMatrix(rows, kFeatureDim);
  for (std::size_t r = 0; r < rows; ++r) {
    in.candidates.push_back("w" + std::to_string(r));
    auto row = in.features.row(r);
    row[kBias] = 1.0;
    for (std::size_t k = 1; k < kFeatureDim; ++k) row[k] = u(gen) < 0.3 ? 0.0 : u(gen);
  }
  return in;
}

PolicyParams random_params(std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  PolicyParams p = PolicyParams::zeros();
  for (double& w : p.w) w = n(gen);
  return p;
}

ExampleRecord two_turn_example() {
  Dialogue d;
  d.id = "d";
  d.turns = {{Role::user, "What is the capital of Varath?"},
             {Role::agent, "The capital of Varath is Lomira."},
             {Role::user, "And its founder?"}};
  return explode_examples(d, false)[1];
}

}  // namespace

TEST_CASE("features are non-negative with a unit bias") {
  Corpus corpus({{"p1", "Varath", "The capital of Varath is Lomira."}, {"p2", "Tesk", "Tesk is small."}});
  std::vector<text::TokenSeq> docs;
  for (const auto& p : corpus.passages()) docs.push_back(analyze(p.text, 0));
  const auto idf = IdfTable::build(docs, false);
  const auto in = featurize(two_turn_example(), idf);
  CHECK(in.question == "And its founder?");
  REQUIRE(in.candidates.size() == in.features.rows());
  for (std::size_t r = 0; r < in.features.rows(); ++r) {
    CHECK(in.features.row(r)[kBias] == 1.0);
    for (double x : in.features.row(r)) CHECK(x >= 0.0);
  }
  // Context tokens are unique and exclude question tokens.
  for (const auto& c : in.candidates) CHECK(c != "its");
  auto varath = std::find(in.candidates.begin(), in.candidates.end(), "varath") - in.candidates.begin();
  REQUIRE(varath < static_cast<long>(in.candidates.size()));
  CHECK(in.features.row(varath)[kCapitalized] == 1.0);
  CHECK(in.features.row(varath)[kInPrevQuestion] == 1.0);
  CHECK(in.features.row(varath)[kRecency] == 1.0);
}

TEST_CASE("log-probability gradient matches finite differences") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_input(gen, 1 + gen() % 12);
    const auto p = random_params(gen);
    std::vector<std::uint8_t> d(in.features.rows());
    for (auto& x : d) x = gen() & 1;
    const auto analytic = logprob_grad(p, in, d);
    const auto numeric = oracle::numeric_grad(
        [&](const std::vector<double>& w) { return decisions_logprob({w}, in, d); }, p.w);
    CHECK(oracle::relative_error(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("cross entropy gradient matches finite differences") {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_input(gen, 1 + gen() % 12);
    const auto p = random_params(gen);
    std::string rewrite = "what about";
    for (const auto& c : in.candidates)
      if (gen() % 2) rewrite += " " + c;
    const auto analytic = ce_loss_and_grad(p, in, rewrite).grad;
    const auto numeric = oracle::numeric_grad(
        [&](const std::vector<double>& w) { return ce_loss_and_grad({w}, in, rewrite).loss; }, p.w);
    CHECK(oracle::relative_error(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("greedy keeps strictly more probable tokens") {
  std::mt19937_64 gen(3);
  auto in = random_input(gen, 4);
  auto zero = PolicyParams::zeros();
  // Every probability is exactly one half.
  CHECK(greedy_rewrite(zero, in).text == "what about it");
  PolicyParams bias = zero;
  bias.w[kBias] = 1.0;
  const auto g = greedy_rewrite(bias, in);
  CHECK(g.text == "what about it w0 w1 w2 w3");
  CHECK(g.decisions == std::vector<std::uint8_t>{1, 1, 1, 1});
  CHECK(g.logprob == doctest::Approx(decisions_logprob(bias, in, g.decisions)));
}

TEST_CASE("sampling frequency follows the inclusion probability") {
  std::mt19937_64 gen(4);
  const auto in = random_input(gen, 3);
  const auto p = random_params(gen);
  const auto probs = inclusion_probabilities(p, in);
  Rng rng(9);
  constexpr std::size_t kN = 20000;
  std::vector<double> freq(3, 0.0);
  for (const auto& s : sample_rewrites(p, in, kN, rng))
    for (std::size_t r = 0; r < 3; ++r) freq[r] += s.decisions[r];
  for (std::size_t r = 0; r < 3; ++r) {
    const double sd = std::sqrt(probs[r] * (1 - probs[r]) / kN);
    CHECK(std::abs(freq[r] / kN - probs[r]) < 5 * sd + 1e-12);
  }
}

TEST_CASE("checkpoints round trip exactly") {
  std::mt19937_64 gen(5);
  const auto p = random_params(gen);
  double threshold = 0;
  CHECK(parse_policy(serialize_policy(p, 0.6), &threshold) == p);
  CHECK(threshold == 0.6);
  CHECK_THROWS_AS(parse_policy("garbage"), ValidationError);
  PolicyParams wrong = PolicyParams::zeros(3);
  CHECK_THROWS_AS(inclusion_probabilities(wrong, random_input(gen, 2)), ValidationError);
}

TEST_CASE("sigmoid is stable") {
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(std::isfinite(log_sigmoid(-800.0)));
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
}
