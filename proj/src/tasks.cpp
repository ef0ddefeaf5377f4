// SPDX-License-Identifier: Apache-2.0

#include "cerlab/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cerlab/error.hpp"
#include "cerlab/rng.hpp"

namespace cerlab {

std::vector<std::size_t> TaskSpec::alias_group_of() const {
  if (!alias_groups) {
    throw InputDomainError("task has no alias groups");
  }
  std::vector<std::size_t> group(shape.answers, 0);
  for (std::size_t g = 0; g < alias_groups->size(); ++g) {
    for (AnswerId a : (*alias_groups)[g]) {
      group.at(a.value) = g;
    }
  }
  return group;
}

void TaskSpec::validate(std::size_t max_solutions) const {
  shape.validate(max_solutions);
  if (reference.size() != shape.questions) {
    throw InputDomainError("task: reference map must cover every question");
  }
  for (AnswerId a : reference) {
    if (a.value >= shape.answers) {
      throw InputDomainError("task: reference answer out of range");
    }
  }
  if (distribution.size() != shape.questions) {
    throw InputDomainError("task: distribution length must equal Q");
  }
  double total = 0.0;
  for (double p : distribution) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InputDomainError("task: distribution entries must be finite and non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InputDomainError("task: distribution must sum to 1");
  }
  if (alias_groups) {
    std::vector<int> seen(shape.answers, 0);
    for (const auto& group : *alias_groups) {
      if (group.empty()) {
        throw InputDomainError("task: empty alias group");
      }
      for (AnswerId a : group) {
        if (a.value >= shape.answers || seen[a.value]++ != 0) {
          throw InputDomainError("task: alias groups must partition the answer alphabet");
        }
      }
    }
    for (int count : seen) {
      if (count != 1) {
        throw InputDomainError("task: alias groups must partition the answer alphabet");
      }
    }
  }
}

TaskSpec generate_task(std::uint64_t seed, std::size_t questions, std::size_t vocab,
                       std::size_t length, std::size_t answers, std::size_t max_solutions) {
  TaskSpec task;
  task.shape = PolicyShape{questions, vocab, length, answers};
  task.shape.validate(max_solutions);
  task.reference.reserve(questions);
  for (std::size_t q = 0; q < questions; ++q) {
    RngStream rng(StreamKey{seed, q, 0, StreamRole::TaskReference, 0});
    task.reference.emplace_back(rng.below(answers));
  }
  task.distribution.assign(questions, 1.0 / static_cast<double>(questions));
  return task;
}

AliasGroups contiguous_alias_groups(std::size_t answers, std::size_t group_size) {
  if (group_size == 0) {
    throw InputDomainError("alias group size must be positive");
  }
  AliasGroups groups;
  for (std::size_t start = 0; start < answers; start += group_size) {
    std::vector<AnswerId> group;
    for (std::size_t a = start; a < std::min(answers, start + group_size); ++a) {
      group.emplace_back(a);
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

PolicyParams init_policy(const TaskSpec& task, InitSpec spec, std::uint64_t seed,
                         double temperature) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) {
    throw InputDomainError("init_policy: sigma must be finite and non-negative");
  }
  PolicyParams params(task.shape, temperature);
  if (spec.kind == InitKind::Zero || spec.sigma == 0.0) {
    return params;
  }
  // One stream per table so the answer logits do not depend on V's prefix count.
  RngStream solution_rng(StreamKey{seed, 0, 0, StreamRole::PolicyInit, 0});
  for (double& z : params.solution_logits()) {
    z = spec.sigma * solution_rng.normal();
  }
  RngStream answer_rng(StreamKey{seed, 0, 0, StreamRole::PolicyInit, 1});
  for (double& z : params.answer_logits()) {
    z = spec.sigma * answer_rng.normal();
  }
  return params;
}

PolicyParams init_policy_aliased(const TaskSpec& task, double sigma, double tie_strength,
                                 std::uint64_t seed, double temperature) {
  if (!task.alias_groups) {
    throw InputDomainError("init_policy_aliased: task has no alias groups");
  }
  if (!(tie_strength >= 0.0 && tie_strength <= 1.0)) {
    throw InputDomainError("init_policy_aliased: tie_strength must lie in [0, 1]");
  }
  PolicyParams params = init_policy(task, InitSpec{InitKind::Gaussian, sigma}, seed, temperature);
  if (tie_strength == 0.0) {
    return params;
  }
  const PolicyShape& shape = task.shape;
  for (std::size_t q = 0; q < shape.questions; ++q) {
    for (std::size_t s = 0; s < shape.solution_count(); ++s) {
      std::span<double> row = params.answer_row(QuestionId(q), s);
      for (const auto& group : *task.alias_groups) {
        double mean = 0.0;
        for (AnswerId a : group) {
          mean += row[a.value];
        }
        mean /= static_cast<double>(group.size());
        for (AnswerId a : group) {
          row[a.value] = (1.0 - tie_strength) * row[a.value] + tie_strength * mean;
        }
      }
    }
  }
  return params;
}

}  // namespace cerlab
