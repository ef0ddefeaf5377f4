// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "cerlab/policy.hpp"
#include "cerlab/types.hpp"

namespace cerlab {

using AliasGroups = std::vector<std::vector<AnswerId>>;

/// Question universe with one reference answer per question and a sampling
/// distribution over questions.
struct TaskSpec {
  PolicyShape shape;
  std::vector<AnswerId> reference;
  std::vector<double> distribution;
  /// Optional partition of the answer alphabet into groups of interchangeable answers.
  std::optional<AliasGroups> alias_groups;

  AnswerId reference_for(QuestionId q) const { return reference.at(q.value); }
  /// Group index of each answer; requires alias_groups.
  std::vector<std::size_t> alias_group_of() const;
  /// Throws InputDomainError when any invariant is broken.
  void validate(std::size_t max_solutions = kDefaultEnumerationCap) const;

  bool operator==(const TaskSpec&) const = default;
};

/// Uniform question distribution, references drawn uniformly per question from
/// the seed's TaskReference stream.
TaskSpec generate_task(std::uint64_t seed, std::size_t questions, std::size_t vocab,
                       std::size_t length, std::size_t answers,
                       std::size_t max_solutions = kDefaultEnumerationCap);

/// Contiguous groups {0..g-1}, {g..2g-1}, ...; the last group may be shorter.
AliasGroups contiguous_alias_groups(std::size_t answers, std::size_t group_size);

enum class InitKind { Zero, Gaussian };

struct InitSpec {
  InitKind kind = InitKind::Zero;
  double sigma = 0.0;
};

/// Zero logits (uniform policy) or i.i.d. N(0, sigma^2) logits.
PolicyParams init_policy(const TaskSpec& task, InitSpec spec, std::uint64_t seed,
                         double temperature = 1.0);

/// Gaussian init followed, for each answer row, by z <- (1 - t) z + t * mean(group)
/// within every alias group. t = 1 ties the group's logits exactly.
PolicyParams init_policy_aliased(const TaskSpec& task, double sigma, double tie_strength,
                                 std::uint64_t seed, double temperature = 1.0);

}  // namespace cerlab
