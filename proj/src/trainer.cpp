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

#include "convqr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "convqr/error.hpp"

namespace convqr {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kMaskStream = 0x4d41534bULL;

CandidatePool pool_of(std::span<const TrainExample* const> batch) {
  CandidatePool pool;
  for (const auto* ex : batch) {
    pool.passages.push_back(ex->positive);
    pool.passages.push_back(ex->negative);
    pool.positives.push_back(ex->positive);
  }
  std::sort(pool.passages.begin(), pool.passages.end());
  pool.passages.erase(std::unique(pool.passages.begin(), pool.passages.end()), pool.passages.end());
  return pool;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

bool ce_enabled(const std::string& example_id, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0) return false;
  if (fraction >= 1.0) return true;
  const double u = static_cast<double>(derive_seed(seed, kMaskStream, fnv1a64(example_id)) >> 11) *
                   0x1.0p-53;
  return u < fraction;
}

std::vector<TrainExample> make_train_examples(std::span<const ExampleRecord> examples,
                                              std::span<const WeakLabel> labels,
                                              const IdfTable& idf, double ce_mask_fraction,
                                              std::uint64_t seed,
                                              std::size_t* rewrites_attached) {
  std::unordered_map<std::string, const WeakLabel*> by_id;
  for (const auto& l : labels) by_id.emplace(l.example_id, &l);
  std::vector<TrainExample> out;
  std::size_t attached = 0;
  for (const auto& ex : examples) {
    const std::string id = ex.id();
    auto it = by_id.find(id);
    if (it == by_id.end()) continue;
    TrainExample t;
    t.id = id;
    t.input = featurize(ex, idf);
    t.positive = it->second->positive;
    t.negative = it->second->negative;
    if (ex.human_rewrite && ce_enabled(id, ce_mask_fraction, seed)) {
      t.human_rewrite = ex.human_rewrite;
      ++attached;
    }
    out.push_back(std::move(t));
  }
  if (rewrites_attached) *rewrites_attached = attached;
  return out;
}

int score(std::string_view rewrite, const CandidatePool& pool, const Retriever& retriever,
          DocIndex positive) {
  if (pool.passages.empty()) throw ValidationError("score: empty candidate pool");
  if (!pool.contains(positive)) throw ValidationError("score: positive passage not in the pool");
  const auto top = retriever.retrieve(rewrite, pool.passages, 1);
  return top.front().doc == positive ? 1 : 0;
}

int reward(std::string_view sampled, std::string_view baseline, const CandidatePool& pool,
           const Retriever& retriever, DocIndex positive) {
  return score(sampled, pool, retriever, positive) - score(baseline, pool, retriever, positive);
}

void RewardCounts::add(int r) {
  if (r < -1 || r > 1) {
    ++out_of_range;
    return;
  }
  ++by_value[static_cast<std::size_t>(r + 1)];
}

void RewardCounts::add(const RewardCounts& o) {
  for (std::size_t i = 0; i < 3; ++i) by_value[i] += o.by_value[i];
  out_of_range += o.out_of_range;
}

Rollout rollout(const PolicyParams& params, const TrainExample& example, const CandidatePool& pool,
                const Retriever& retriever, std::size_t m, double threshold, Rng& rng) {
  Rollout r;
  r.greedy = greedy_rewrite(params, example.input, threshold);
  r.greedy_score = score(r.greedy.text, pool, retriever, example.positive);
  r.samples = sample_rewrites(params, example.input, m, rng);
  r.rewards.reserve(m);
  for (const auto& s : r.samples) {
    // Identical decisions retrieve identically; skip the retrieval call.
    const int sample_score = s.decisions == r.greedy.decisions
                                 ? r.greedy_score
                                 : score(s.text, pool, retriever, example.positive);
    r.rewards.push_back(sample_score - r.greedy_score);
  }
  return r;
}

LossGrad rl_surrogate(const PolicyParams& params, std::span<const TrainExample* const> batch,
                      std::span<const Rollout> rollouts) {
  if (batch.size() != rollouts.size()) throw ValidationError("rl: batch and rollouts differ in size");
  LossGrad out{0.0, std::vector<double>(params.w.size(), 0.0)};
  if (batch.empty()) return out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ro = rollouts[i];
    const double inv_m = 1.0 / static_cast<double>(ro.samples.size());
    for (std::size_t s = 0; s < ro.samples.size(); ++s) {
      const int r = ro.rewards[s];
      if (r == 0) continue;
      const auto& d = ro.samples[s].decisions;
      out.loss -= inv_m * r * decisions_logprob(params, batch[i]->input, d);
      const auto g = logprob_grad(params, batch[i]->input, d);
      for (std::size_t k = 0; k < g.size(); ++k) out.grad[k] -= inv_m * r * g[k];
    }
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv_b;
  for (double& g : out.grad) g *= inv_b;
  return out;
}

RlResult rl_loss_and_grad(const PolicyParams& params, std::span<const TrainExample* const> batch,
                          const CandidatePool& pool, const Retriever& retriever, std::size_t m,
                          double threshold, std::uint64_t seed) {
  RlResult res;
  res.rollouts.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    res.rollouts.push_back(rollout(params, *batch[i], pool, retriever, m, threshold, rng));
    for (int r : res.rollouts.back().rewards) res.rewards.add(r);
  }
  res.value = rl_surrogate(params, batch, res.rollouts);
  return res;
}

MixedResult mixed_loss_and_grad(const PolicyParams& params,
                                std::span<const TrainExample* const> batch,
                                const CandidatePool& pool, const Retriever& retriever,
                                double alpha, std::size_t m, double threshold, std::uint64_t seed) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("mixed loss: alpha must lie in [0, 1]");
  MixedResult out;
  out.grad.assign(params.w.size(), 0.0);
  std::vector<double> rl_grad(params.w.size(), 0.0);
  std::vector<double> ce_grad(params.w.size(), 0.0);

  if (alpha > 0.0) {
    auto rl = rl_loss_and_grad(params, batch, pool, retriever, m, threshold, seed);
    out.rl_loss = rl.value.loss;
    rl_grad = std::move(rl.value.grad);
    out.rewards = rl.rewards;
  }
  if (alpha < 1.0) {
    for (const auto* ex : batch) {
      if (!ex->human_rewrite) continue;
      auto ce = ce_loss_and_grad(params, ex->input, *ex->human_rewrite);
      out.ce_loss += ce.loss;
      for (std::size_t k = 0; k < ce_grad.size(); ++k) ce_grad[k] += ce.grad[k];
      ++out.ce_examples;
    }
    if (out.ce_examples > 0) {
      const double inv = 1.0 / static_cast<double>(out.ce_examples);
      out.ce_loss *= inv;
      for (double& g : ce_grad) g *= inv;
    }
  }
  out.loss = alpha * out.rl_loss + (1.0 - alpha) * out.ce_loss;
  for (std::size_t k = 0; k < out.grad.size(); ++k)
    out.grad[k] = alpha * rl_grad[k] + (1.0 - alpha) * ce_grad[k];
  return out;
}

// ---------------------------------------------------------------------------

std::size_t DevSet::size() const {
  std::size_t n = 0;
  for (const auto& b : batches) n += b.size();
  return n;
}

DevSet make_dev_set(std::span<const TrainExample> dev, std::size_t batch_size) {
  if (batch_size == 0) throw ValidationError("dev set: batch size must be positive");
  DevSet set;
  for (std::size_t i = 0; i < dev.size(); i += batch_size) {
    std::vector<const TrainExample*> batch;
    for (std::size_t j = i; j < std::min(dev.size(), i + batch_size); ++j) batch.push_back(&dev[j]);
    set.pools.push_back(pool_of(batch));
    set.batches.push_back(std::move(batch));
  }
  return set;
}

double dev_accuracy(const PolicyParams& params, const DevSet& dev, const Retriever& retriever,
                    double threshold) {
  const std::size_t n = dev.size();
  if (n == 0) throw ValidationError("dev accuracy: empty dev set");
  std::size_t wins = 0;
  for (std::size_t b = 0; b < dev.batches.size(); ++b) {
    for (const auto* ex : dev.batches[b]) {
      const auto q = greedy_rewrite(params, ex->input, threshold);
      wins += static_cast<std::size_t>(score(q.text, dev.pools[b], retriever, ex->positive));
    }
  }
  return static_cast<double>(wins) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

std::string_view optimizer_name(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw ValidationError("unknown optimizer '" + std::string(name) + "' (expected adam|sgd)");
}

void apply_update(OptimizerKind kind, std::span<double> w, std::span<const double> grad, double lr,
                  OptimizerState& state, double beta1, double beta2, double eps) {
  if (grad.size() != w.size()) throw ValidationError("optimizer: gradient has the wrong dimension");
  if (kind == OptimizerKind::sgd) {
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * grad[k];
    return;
  }
  if (state.m.size() != w.size()) {
    state.m.assign(w.size(), 0.0);
    state.v.assign(w.size(), 0.0);
    state.t = 0;
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < w.size(); ++k) {
    state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * grad[k];
    state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * grad[k] * grad[k];
    w[k] -= lr * (state.m[k] / c1) / (std::sqrt(state.v[k] / c2) + eps);
  }
}

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("train: alpha must lie in [0, 1]");
  if (m < 1) throw ValidationError("train: m must be at least 1");
  if (batch_size < 1) throw ValidationError("train: batch size must be at least 1");
  if (!(learning_rate > 0.0)) throw ValidationError("train: learning rate must be positive");
  if (!(ce_mask_fraction >= 0.0 && ce_mask_fraction <= 1.0))
    throw ValidationError("train: ce mask fraction must lie in [0, 1]");
  if (eval_every < 1) throw ValidationError("train: eval interval must be at least 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("train: threshold must lie in (0, 1)");
  if (warmup_steps && steps > 0 && *warmup_steps > steps)
    throw ValidationError("train: warmup exceeds total steps");
  if (init == InitMode::checkpoint && init_params.w.size() != kFeatureDim)
    throw ValidationError("train: initial checkpoint has the wrong dimension");
}

std::size_t TrainConfig::warmup() const { return warmup_steps.value_or(steps / 10); }

double TrainConfig::learning_rate_at(std::size_t step) const {
  const std::size_t w = warmup();
  if (step < w) return learning_rate * static_cast<double>(step + 1) / static_cast<double>(w);
  if (steps <= w) return learning_rate;
  return learning_rate * static_cast<double>(steps - step) / static_cast<double>(steps - w);
}

PolicyParams ce_pretrain(std::span<const TrainExample> examples, std::size_t steps, double lr,
                         std::size_t* rewrites_consumed) {
  PolicyParams params = PolicyParams::zeros();
  std::vector<const TrainExample*> supervised;
  for (const auto& ex : examples)
    if (ex.human_rewrite) supervised.push_back(&ex);
  std::size_t consumed = 0;
  if (!supervised.empty()) {
    const double inv = 1.0 / static_cast<double>(supervised.size());
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<double> grad(params.w.size(), 0.0);
      for (const auto* ex : supervised) {
        const auto ce = ce_loss_and_grad(params, ex->input, *ex->human_rewrite);
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += ce.grad[k] * inv;
      }
      consumed += supervised.size();
      for (std::size_t k = 0; k < grad.size(); ++k) params.w[k] -= lr * grad[k];
    }
  }
  if (rewrites_consumed) *rewrites_consumed += consumed;
  return params;
}

TrainResult train(const TrainConfig& config, std::span<const TrainExample> train_set,
                  const DevSet& dev, const Retriever& retriever,
                  const std::function<void(const MetricRecord&)>& on_metric) {
  config.validate();
  TrainResult result;
  auto& state = result.state;
  switch (config.init) {
    case InitMode::plain: state.params = PolicyParams::zeros(); break;
    case InitMode::ce_pretrained:
      state.params = ce_pretrain(train_set, config.ce_pretrain_steps, config.ce_pretrain_lr,
                                 &result.stats.rewrites_consumed);
      break;
    case InitMode::checkpoint: state.params = config.init_params; break;
  }
  state.best_params = state.params;
  state.best_dev_accuracy = dev_accuracy(state.params, dev, retriever, config.threshold);
  state.best_step = 0;
  {
    MetricRecord rec;
    rec.dev_accuracy = state.best_dev_accuracy;
    rec.weights = state.params.w;
    result.metrics.push_back(rec);
    if (on_metric) on_metric(rec);
  }
  if (config.steps == 0) return result;
  if (train_set.empty()) throw ValidationError("train: no labeled training examples");

  std::vector<std::size_t> order(train_set.size());
  std::size_t epoch = 0;
  std::size_t cursor = order.size();
  auto reshuffle = [&] {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(config.seed, kShuffleStream, epoch++));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    cursor = 0;
  };
  const std::size_t batch_size = std::min(config.batch_size, train_set.size());

  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<const TrainExample*> batch;
    batch.reserve(batch_size);
    while (batch.size() < batch_size) {
      if (cursor == order.size()) reshuffle();
      const TrainExample* ex = &train_set[order[cursor++]];
      if (std::find(batch.begin(), batch.end(), ex) == batch.end()) batch.push_back(ex);
    }
    const CandidatePool pool = pool_of(batch);
    const auto mixed = mixed_loss_and_grad(state.params, batch, pool, retriever, config.alpha,
                                           config.m, config.threshold,
                                           derive_seed(config.seed, step + 1));
    if (!std::isfinite(mixed.loss) || !all_finite(mixed.grad))
      throw RuntimeError("train: non-finite loss at step " + std::to_string(step + 1) +
                         " (rl " + std::to_string(mixed.rl_loss) + ", ce " +
                         std::to_string(mixed.ce_loss) + ")");

    const double lr = config.learning_rate_at(step);
    const bool zero = std::all_of(mixed.grad.begin(), mixed.grad.end(), [](double g) { return g == 0.0; });
    if (!zero) apply_update(config.optimizer, state.params.w, mixed.grad, lr, state.optimizer);
    state.step = step + 1;
    result.stats.rewrites_consumed += mixed.ce_examples;
    result.stats.rewards.add(mixed.rewards);
    if (zero) ++result.stats.zero_gradient_steps;

    MetricRecord rec;
    rec.step = state.step;
    rec.loss = mixed.loss;
    rec.rl_loss = mixed.rl_loss;
    rec.ce_loss = mixed.ce_loss;
    rec.learning_rate = lr;
    const std::size_t n_rewards = mixed.rewards.total();
    if (n_rewards > 0) {
      rec.mean_reward = (static_cast<double>(mixed.rewards.by_value[2]) -
                         static_cast<double>(mixed.rewards.by_value[0])) /
                        static_cast<double>(n_rewards);
    }
    if (state.step % config.eval_every == 0 || state.step == config.steps) {
      const double acc = dev_accuracy(state.params, dev, retriever, config.threshold);
      rec.dev_accuracy = acc;
      rec.weights = state.params.w;
      if (acc > state.best_dev_accuracy) {
        state.best_dev_accuracy = acc;
        state.best_params = state.params;
        state.best_step = state.step;
      }
    }
    result.metrics.push_back(rec);
    if (on_metric) on_metric(rec);
  }
  return result;
}

std::string serialize_metric(const MetricRecord& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["loss"] = m.loss;
  j["rl_loss"] = m.rl_loss;
  j["ce_loss"] = m.ce_loss;
  j["lr"] = m.learning_rate;
  j["mean_reward"] = m.mean_reward;
  if (m.dev_accuracy) j["dev_accuracy"] = *m.dev_accuracy;
  if (!m.weights.empty()) j["weights"] = m.weights;
  return j.dump();
}

}  // namespace convqr
