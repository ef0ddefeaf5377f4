// SPDX-License-Identifier: Apache-2.0

#include "cerlab/trainer.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "cerlab/error.hpp"
#include "cerlab/parallel.hpp"

namespace cerlab {

void TrainConfig::validate(bool allow_zero_rate) const {
  if (batch_size < 1) {
    throw ConfigError("train: batch_size must be at least 1");
  }
  if (rollouts < 2) {
    throw ConfigError("train: N (rollouts) must be at least 2 for leave-one-out baselines");
  }
  if (subset < 1 || subset > rollouts) {
    throw ConfigError("train: M (subset) must lie in [1, N]");
  }
  const bool rate_ok = allow_zero_rate ? learning_rate >= 0.0 : learning_rate > 0.0;
  if (!rate_ok || !std::isfinite(learning_rate)) {
    throw ConfigError("train: learning_rate must be positive and finite");
  }
  if (eval.mode == EvalMode::Sampled && eval.samples < 1) {
    throw ConfigError("train: sampled evaluation needs at least one sample");
  }
  if (init.sigma < 0.0 || !std::isfinite(init.sigma)) {
    throw ConfigError("train: init sigma must be finite and non-negative");
  }
}

std::vector<double> rloo_advantages(std::span<const double> rewards) {
  const std::size_t n = rewards.size();
  if (n < 2) {
    throw ConfigError("rloo_advantages: need at least two rewards per group");
  }
  const double peers = static_cast<double>(n - 1);
  std::vector<double> advantages(n);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k != i) {
        total += rewards[i] - rewards[k];
      }
    }
    advantages[i] = total / peers;
  }
  return advantages;
}

namespace {

QuestionId select_question(const TaskSpec& task, const TrainConfig& config, std::size_t step,
                           std::size_t slot) {
  const std::size_t q_count = task.shape.questions;
  if (config.order == QuestionOrder::Iid) {
    RngStream rng(StreamKey{config.seed, 0, step, StreamRole::QuestionDraw, slot});
    return QuestionId(rng.categorical(task.distribution));
  }
  const std::size_t position = step * config.batch_size + slot;
  const std::size_t epoch = position / q_count;
  std::vector<std::size_t> order(q_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(StreamKey{config.seed, 0, epoch, StreamRole::EpochShuffle, 0});
  for (std::size_t i = q_count; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  return QuestionId(order[position % q_count]);
}

}  // namespace

GroupRewards compute_rewards(const PolicyParams& params, const TaskSpec& task,
                             const TrainConfig& config, QuestionId q,
                             std::span<const Rollout> rollouts, std::size_t step, std::size_t slot) {
  const AnswerId a_ref = task.reference_for(q);
  GroupRewards out;
  out.rewards.resize(rollouts.size());
  switch (config.reward_kind) {
    case RewardKind::ExactMatch:
      for (std::size_t i = 0; i < rollouts.size(); ++i) {
        out.rewards[i] = exact_match_reward(rollouts[i].answer, a_ref);
      }
      return out;
    case RewardKind::CerExact: {
      std::map<std::size_t, double> cache;
      for (std::size_t i = 0; i < rollouts.size(); ++i) {
        const AnswerId a = rollouts[i].answer;
        auto it = cache.find(a.value);
        if (it == cache.end()) {
          it = cache.emplace(a.value, exact_cer(params, q, a, a_ref)).first;
        }
        out.rewards[i] = it->second;
      }
      return out;
    }
    case RewardKind::CerEmpirical:
    case RewardKind::Combined:
      break;
  }

  const BatchOptions options{config.dedup};
  RewardBatch batch;
  if (config.reward_samples == RewardSamples::Reuse) {
    RngStream rng(StreamKey{config.seed, q.value, step, StreamRole::RewardSubset, slot});
    batch = batch_cer(params, q, rollouts, a_ref, config.subset, rng, options);
  } else {
    RngStream rng(StreamKey{config.seed, q.value, step, StreamRole::FreshSolutions, slot});
    std::vector<Solution> solutions;
    solutions.reserve(config.subset);
    for (std::size_t j = 0; j < config.subset; ++j) {
      solutions.push_back(sample_solution(params, q, rng));
    }
    std::vector<AnswerId> answers;
    answers.reserve(rollouts.size());
    for (const Rollout& r : rollouts) {
      answers.push_back(r.answer);
    }
    batch = score_answers(params, q, answers, a_ref, solutions, options);
  }
  out.degenerate_rows = batch.degenerate_rows.size();
  out.rewards = config.reward_kind == RewardKind::Combined
                    ? combine_rewards(batch.answers, a_ref, batch.R)
                    : batch.R;
  return out;
}

StepResult train_step(const PolicyParams& params, const TaskSpec& task, const TrainConfig& config,
                      std::size_t step) {
  const auto start = std::chrono::steady_clock::now();
  config.validate(/*allow_zero_rate=*/true);
  if (params.shape() != task.shape) {
    throw ConfigError("train_step: policy shape does not match the task");
  }
  const std::size_t batch = config.batch_size;
  const std::size_t n = config.rollouts;

  struct SlotOutput {
    std::vector<double> rewards;
    std::vector<double> advantages;
    std::size_t degenerate_rows = 0;
    LogProbGradient gradient;  // sum_i A_i grad log pi(a_i, s_i | q)
  };
  std::vector<SlotOutput> slots(batch);

  // Rewards are plain numbers here: nothing below differentiates through them.
  parallel_for(batch, config.jobs, [&](std::size_t slot) {
    const QuestionId q = select_question(task, config, step, slot);
    RngStream rng(StreamKey{config.seed, q.value, step, StreamRole::Rollout, slot});
    std::vector<Rollout> rollouts;
    rollouts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      rollouts.push_back(sample_rollout(params, q, rng));
    }
    GroupRewards rewards = compute_rewards(params, task, config, q, rollouts, step, slot);
    SlotOutput& out = slots[slot];
    out.advantages = rloo_advantages(rewards.rewards);
    out.rewards = std::move(rewards.rewards);
    out.degenerate_rows = rewards.degenerate_rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (out.advantages[i] != 0.0) {
        out.gradient.add_scaled(
            grad_logprob_rollout(params, q, rollouts[i].solution, rollouts[i].answer),
            out.advantages[i]);
      }
    }
  });

  const double normalizer = 1.0 / static_cast<double>(batch * n);
  LogProbGradient total;
  StepMetrics metrics;
  metrics.step = step + 1;
  double reward_sum = 0.0;
  double advantage_sum = 0.0;
  for (const SlotOutput& slot : slots) {
    total.add_scaled(slot.gradient, normalizer);
    for (std::size_t i = 0; i < n; ++i) {
      reward_sum += slot.rewards[i];
      advantage_sum += std::abs(slot.advantages[i]);
    }
    metrics.degenerate_rows += slot.degenerate_rows;
  }
  metrics.mean_reward = reward_sum * normalizer;
  metrics.mean_abs_advantage = advantage_sum * normalizer;

  PolicyParams updated = params;
  try {
    apply_update_in_place(updated, total, config.learning_rate);
  } catch (const UpdateRejected& e) {
    throw TrainingAborted("train_step " + std::to_string(step + 1) + ": " + e.what());
  }
  metrics.millis =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return StepResult{std::move(updated), metrics};
}

Rollout greedy_decode(const PolicyParams& params, QuestionId q) {
  const PolicyShape& shape = params.shape();
  const auto argmax = [](std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) {
        best = c;
      }
    }
    return best;
  };
  Rollout out;
  std::size_t row = 0;
  for (std::size_t t = 0; t < shape.length; ++t) {
    const std::size_t token = argmax(params.solution_row(q, row));
    out.solution.tokens.emplace_back(token);
    row = row * shape.vocab + 1 + token;
  }
  const std::size_t index = solution_index(out.solution, shape.vocab, shape.length);
  out.answer = AnswerId(argmax(params.answer_row(q, index)));
  return out;
}

double evaluate_pass1(const PolicyParams& params, const TaskSpec& task, EvalSpec spec,
                      RngStream& rng) {
  const std::size_t questions = task.shape.questions;
  double total = 0.0;
  for (std::size_t q = 0; q < questions; ++q) {
    const QuestionId id(q);
    const AnswerId a_ref = task.reference_for(id);
    if (spec.mode == EvalMode::Greedy) {
      total += exact_match_reward(greedy_decode(params, id).answer, a_ref);
      continue;
    }
    if (spec.samples == 0) {
      throw InputDomainError("evaluate_pass1: sampled mode needs at least one sample");
    }
    std::size_t correct = 0;
    for (std::size_t k = 0; k < spec.samples; ++k) {
      correct += sample_rollout(params, id, rng).answer == a_ref ? 1 : 0;
    }
    total += static_cast<double>(correct) / static_cast<double>(spec.samples);
  }
  return total / static_cast<double>(questions);
}

TrainingRun run_training(const TaskSpec& task, const TrainConfig& config, PolicyParams initial) {
  config.validate();
  task.validate();
  TrainingRun run{{}, std::move(initial)};
  run.metrics.reserve(config.steps);
  for (std::size_t step = 0; step < config.steps; ++step) {
    StepResult result = train_step(run.params, task, config, step);
    run.params = std::move(result.params);
    const bool last = step + 1 == config.steps;
    if (config.eval_every > 0 && ((step + 1) % config.eval_every == 0 || last)) {
      RngStream rng(StreamKey{config.seed, 0, step, StreamRole::Evaluation, 0});
      result.metrics.pass1 = evaluate_pass1(run.params, task, config.eval, rng);
    }
    run.metrics.push_back(result.metrics);
  }
  return run;
}

TrainingRun run_training(const TaskSpec& task, const TrainConfig& config) {
  return run_training(task, config, init_policy(task, config.init, config.seed));
}

std::string metrics_csv(std::span<const StepMetrics> metrics, bool include_timing) {
  std::ostringstream out;
  out << "step,mean_reward,mean_abs_advantage,pass1,degenerate_rows,millis\n";
  for (const StepMetrics& m : metrics) {
    out << m.step << ',' << format_double(m.mean_reward) << ','
        << format_double(m.mean_abs_advantage) << ','
        << (m.pass1 ? format_double(*m.pass1) : std::string()) << ',' << m.degenerate_rows << ','
        << (include_timing ? format_double(m.millis) : std::string("0")) << '\n';
  }
  return out.str();
}

}  // namespace cerlab
