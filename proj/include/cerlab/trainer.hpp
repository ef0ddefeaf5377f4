// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cerlab/policy.hpp"
#include "cerlab/reward.hpp"
#include "cerlab/rng.hpp"
#include "cerlab/tasks.hpp"

namespace cerlab {

enum class EvalMode { Greedy, Sampled };

struct EvalSpec {
  EvalMode mode = EvalMode::Sampled;
  /// Rollouts per question in sampled mode.
  std::size_t samples = 64;
};

/// Where CER takes its solution set from.
enum class RewardSamples {
  Reuse,  // the N training rollouts
  Fresh,  // M extra draws from pi(.|q)
};

/// How questions are picked for a batch.
enum class QuestionOrder {
  Iid,    // independent draws from the task distribution
  Epoch,  // successive shuffled passes over the question list
};

/// Defaults are the smoke-task settings. The learning rate looks large because
/// each rollout's gradient is scaled by 1 / (batch_size * N) and a tabular
/// softmax row gradient is itself at most 1 in magnitude.
struct TrainConfig {
  std::size_t batch_size = 2;
  std::size_t rollouts = 16;  // N
  std::size_t subset = 16;    // M
  double learning_rate = 1024.0;
  std::size_t steps = 500;
  RewardKind reward_kind = RewardKind::CerEmpirical;
  std::uint64_t seed = 0;
  std::size_t eval_every = 50;
  EvalSpec eval;
  RewardSamples reward_samples = RewardSamples::Reuse;
  QuestionOrder order = QuestionOrder::Iid;
  bool dedup = true;
  /// Logit noise of the initial policy when run_training builds it.
  InitSpec init{InitKind::Gaussian, 0.3};
  /// Worker threads for rollout generation and reward computation.
  std::size_t jobs = 1;

  /// Throws ConfigError when an invariant is broken. train_step itself also
  /// accepts a zero learning rate, which leaves the policy untouched.
  void validate(bool allow_zero_rate = false) const;
};

struct StepMetrics {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double mean_abs_advantage = 0.0;
  std::optional<double> pass1;
  std::size_t degenerate_rows = 0;
  double millis = 0.0;
};

/// Leave-one-out advantages A_i = R_i - mean_{k != i} R_k, evaluated as
/// sum_{k != i} (R_i - R_k) / (N - 1). Throws ConfigError for N < 2.
std::vector<double> rloo_advantages(std::span<const double> rewards);

struct StepResult {
  PolicyParams params;
  StepMetrics metrics;
};

/// One RLOO ascent step. `step` is the zero-based step index used to key the
/// random streams; metrics.step is step + 1. Throws TrainingAborted on a
/// non-finite gradient.
StepResult train_step(const PolicyParams& params, const TaskSpec& task, const TrainConfig& config,
                      std::size_t step);

/// Rewards for one question's rollouts under the configured reward kind.
struct GroupRewards {
  std::vector<double> rewards;
  std::size_t degenerate_rows = 0;
};
GroupRewards compute_rewards(const PolicyParams& params, const TaskSpec& task,
                             const TrainConfig& config, QuestionId q,
                             std::span<const Rollout> rollouts, std::size_t step, std::size_t slot);

/// Answer produced by greedy decoding; ties go to the lowest token index.
Rollout greedy_decode(const PolicyParams& params, QuestionId q);

/// Fraction of questions answered correctly (unweighted over questions).
double evaluate_pass1(const PolicyParams& params, const TaskSpec& task, EvalSpec spec,
                      RngStream& rng);

struct TrainingRun {
  std::vector<StepMetrics> metrics;
  PolicyParams params;
};

TrainingRun run_training(const TaskSpec& task, const TrainConfig& config, PolicyParams initial);
/// Builds the initial policy from config.init and config.seed.
TrainingRun run_training(const TaskSpec& task, const TrainConfig& config);

/// `step,mean_reward,mean_abs_advantage,pass1,degenerate_rows,millis`; pass1 is
/// empty on steps without evaluation. With include_timing=false millis is 0.
std::string metrics_csv(std::span<const StepMetrics> metrics, bool include_timing = true);

}  // namespace cerlab
