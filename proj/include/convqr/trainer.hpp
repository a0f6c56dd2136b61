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

// Self-critical policy-gradient training against a black-box retriever.
//
// For every example the greedy rewrite q is the baseline and m sampled
// rewrites q_s are scored on the batch's candidate pool P_X:
//
//   score(q)    = 1[top-1 of retrieve(q, P_X) is the example's positive]
//   r(q_s, q)   = score(q_s) - score(q)
//   L_RL        = -(1/m) sum_s r(q_s, q) log Pr(q_s | x)     (batch mean)
//   L_mix       = alpha L_RL + (1 - alpha) L_CE
//
// Rewards are treated as constants, so the gradient of L_RL is the REINFORCE
// estimate -(1/m) sum_s r_s grad log Pr(q_s | x).

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "convqr/policy.hpp"
#include "convqr/retriever.hpp"
#include "convqr/weaksup.hpp"

namespace convqr {

// A labeled, featurized training instance. `human_rewrite` is attached only
// when the example takes part in the supervised term.
struct TrainExample {
  std::string id;
  PolicyInput input;
  DocIndex positive = 0;
  DocIndex negative = 0;
  std::optional<std::string> human_rewrite;
};

// Whether an example's human rewrite is used, decided by a hash of
// (seed, example id) against `fraction`.
bool ce_enabled(const std::string& example_id, double fraction, std::uint64_t seed);

// Joins examples with their weak labels (by example id; unlabeled examples
// are dropped). *rewrites_attached counts the rewrites copied in.
std::vector<TrainExample> make_train_examples(std::span<const ExampleRecord> examples,
                                              std::span<const WeakLabel> labels,
                                              const IdfTable& idf, double ce_mask_fraction,
                                              std::uint64_t seed,
                                              std::size_t* rewrites_attached = nullptr);

int score(std::string_view rewrite, const CandidatePool& pool, const Retriever& retriever,
          DocIndex positive);
int reward(std::string_view sampled, std::string_view baseline, const CandidatePool& pool,
           const Retriever& retriever, DocIndex positive);

struct Rollout {
  RewriteCandidate greedy;
  int greedy_score = 0;
  std::vector<RewriteCandidate> samples;
  std::vector<int> rewards;
};

Rollout rollout(const PolicyParams& params, const TrainExample& example, const CandidatePool& pool,
                const Retriever& retriever, std::size_t m, double threshold, Rng& rng);

// L_RL with the sampled decisions and rewards held fixed; its gradient is
// what rl_loss_and_grad returns.
LossGrad rl_surrogate(const PolicyParams& params, std::span<const TrainExample* const> batch,
                      std::span<const Rollout> rollouts);

struct RewardCounts {
  std::array<std::size_t, 3> by_value{};  // rewards -1, 0, +1
  std::size_t out_of_range = 0;

  void add(int r);
  void add(const RewardCounts& o);
  std::size_t total() const { return by_value[0] + by_value[1] + by_value[2]; }
};

struct RlResult {
  LossGrad value;
  RewardCounts rewards;
  std::vector<Rollout> rollouts;
};

// Rolls out every batch example (example i draws from derive_seed(seed, i))
// and returns the batch-mean L_RL and its gradient.
RlResult rl_loss_and_grad(const PolicyParams& params, std::span<const TrainExample* const> batch,
                          const CandidatePool& pool, const Retriever& retriever, std::size_t m,
                          double threshold, std::uint64_t seed);

struct MixedResult {
  double loss = 0.0;
  double rl_loss = 0.0;
  double ce_loss = 0.0;
  std::vector<double> grad;
  std::size_t ce_examples = 0;  // human rewrites consumed
  RewardCounts rewards;
};

// alpha L_RL + (1 - alpha) L_CE. L_CE is the mean over batch examples that
// carry a human rewrite (0 when none do). The RL term is skipped at
// alpha = 0 and the CE term at alpha = 1.
MixedResult mixed_loss_and_grad(const PolicyParams& params,
                                std::span<const TrainExample* const> batch,
                                const CandidatePool& pool, const Retriever& retriever,
                                double alpha, std::size_t m, double threshold, std::uint64_t seed);

// Frozen dev batches with their pools.
struct DevSet {
  std::vector<std::vector<const TrainExample*>> batches;
  std::vector<CandidatePool> pools;

  std::size_t size() const;
};

DevSet make_dev_set(std::span<const TrainExample> dev, std::size_t batch_size);

// Mean in-batch score of greedy rewrites. Throws ValidationError when empty.
double dev_accuracy(const PolicyParams& params, const DevSet& dev, const Retriever& retriever,
                    double threshold = 0.5);

enum class InitMode { plain, ce_pretrained, checkpoint };

enum class OptimizerKind { adam, sgd };

std::string_view optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

// First and second moment estimates (Adam); unused by plain SGD.
struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
};

// One update of `w` with step size lr.
void apply_update(OptimizerKind kind, std::span<double> w, std::span<const double> grad, double lr,
                  OptimizerState& state, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct TrainConfig {
  double alpha = 0.99;
  std::size_t m = 5;
  std::size_t batch_size = 16;
  std::size_t steps = 600;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 0.1;
  std::optional<std::size_t> warmup_steps;  // default: 10% of steps
  std::uint64_t seed = 7;
  double ce_mask_fraction = 1.0;
  std::size_t eval_every = 50;
  double threshold = 0.5;
  InitMode init = InitMode::plain;
  PolicyParams init_params = PolicyParams::zeros();  // used with InitMode::checkpoint
  std::size_t ce_pretrain_steps = 200;
  double ce_pretrain_lr = 1.0;

  void validate() const;
  std::size_t warmup() const;
  // Warmup then linear decay to zero at `steps`.
  double learning_rate_at(std::size_t step) const;
};

struct MetricRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double rl_loss = 0.0;
  double ce_loss = 0.0;
  double learning_rate = 0.0;
  double mean_reward = 0.0;
  std::optional<double> dev_accuracy;
  std::vector<double> weights;  // filled on evaluation steps
};

struct TrainStats {
  std::size_t rewrites_consumed = 0;  // CE evaluations on a human rewrite
  RewardCounts rewards;
  std::size_t zero_gradient_steps = 0;
};

struct TrainState {
  PolicyParams params;
  OptimizerState optimizer;
  std::size_t step = 0;
  double best_dev_accuracy = -1.0;
  PolicyParams best_params;
  std::size_t best_step = 0;
};

struct TrainResult {
  TrainState state;
  std::vector<MetricRecord> metrics;
  TrainStats stats;
};

// Full-batch gradient descent on the mean CE loss of examples with rewrites.
PolicyParams ce_pretrain(std::span<const TrainExample> examples, std::size_t steps, double lr,
                         std::size_t* rewrites_consumed = nullptr);

// Gradient descent on L_mix with periodic dev evaluation. The returned
// state's best_params is the snapshot with the highest dev accuracy (strict
// improvements only; the initialization is evaluated at step 0). Throws
// RuntimeError on a non-finite loss.
TrainResult train(const TrainConfig& config, std::span<const TrainExample> train_set,
                  const DevSet& dev, const Retriever& retriever,
                  const std::function<void(const MetricRecord&)>& on_metric = {});

std::string serialize_metric(const MetricRecord& m);

}  // namespace convqr
