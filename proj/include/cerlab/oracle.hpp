// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cerlab/policy.hpp"
#include "cerlab/reward.hpp"
#include "cerlab/rng.hpp"

namespace cerlab {

struct TaskSpec;

/// Outcome of one brute-force identity or inequality check.
struct TheoremReport {
  std::string name;
  std::string instance;
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;  // lhs - rhs, or the worst violation for range checks
  double tolerance = 0.0;
  bool pass = false;

  nlohmann::json to_json() const;
};

/// Tolerance for identities evaluated by summing at most a few thousand terms.
inline constexpr double kEnumerationTolerance = 1e-12;

/// sum_s pi(s|q) pi(a|s,q).
double marginal_answer_prob(const PolicyParams& params, QuestionId q, AnswerId a,
                            std::size_t cap = kDefaultEnumerationCap);

/// E_s[pi(a_ref|s,q)] and E_s[pi(a_ref|s,q)^2] under s ~ pi(.|q).
struct LikelihoodMoments {
  double mean = 0.0;
  double second = 0.0;
};
LikelihoodMoments reference_likelihood_moments(const PolicyParams& params, QuestionId q,
                                               AnswerId a_ref, std::size_t cap = kDefaultEnumerationCap);

/// Self-consistency: rho(a_ref, a_ref) equals E[pi^2]/E[pi] and is at least
/// E[pi]. lhs = rho(a_ref, a_ref), rhs = E[pi], gap = lhs - rhs; passes when
/// gap >= -tol and the moment identity holds within tol.
TheoremReport check_theorem1(const PolicyParams& params, QuestionId q, AnswerId a_ref,
                             std::string instance = {}, const CerFunction& cer = {});

/// Value equivalence per question: sum_a P(a|q) rho(a, a_ref) == P(a_ref|q).
TheoremReport check_theorem2(const PolicyParams& params, QuestionId q, AnswerId a_ref,
                             std::string instance = {}, const CerFunction& cer = {});

/// Value equivalence mixed over the task's question distribution.
TheoremReport check_theorem2_dataset(const PolicyParams& params, const TaskSpec& task,
                                     std::string instance = {}, const CerFunction& cer = {});

/// Sweeps every (q, a, a_ref) and checks rho in [0, 1]. lhs/rhs hold the
/// smallest and largest value seen; gap is the largest excursion outside [0, 1].
TheoremReport check_bounds(const PolicyParams& params, const TaskSpec& task,
                           std::string instance = {}, const CerFunction& cer = {});

struct McErrorRow {
  std::size_t M = 0;
  double mean_abs_error = 0.0;
  double std_error = 0.0;
};

/// For each M, draws `trials` independent sets of M solutions from pi(.|q) and
/// reports the mean |empirical_cer - exact_cer| and its standard error.
/// Throws InputDomainError when trials < 100 or any M is zero.
std::vector<McErrorRow> mc_error_study(const PolicyParams& params, QuestionId q, AnswerId a,
                                       AnswerId a_ref, std::span<const std::size_t> M_values,
                                       std::size_t trials, RngStream& rng);

}  // namespace cerlab
