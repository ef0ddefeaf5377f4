// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cerlab/policy.hpp"
#include "cerlab/rng.hpp"
#include "cerlab/types.hpp"

namespace cerlab {

/// A scored rollout: question, solution, generated answer and reference answer.
struct Quadruple {
  QuestionId q;
  Solution s;
  AnswerId a;
  AnswerId a_ref;
};

enum class RewardKind { ExactMatch, CerExact, CerEmpirical, Combined };

std::string_view to_string(RewardKind kind);
/// Accepts exact_match, cer_exact, cer_empirical, combined.
RewardKind parse_reward_kind(std::string_view name);

double exact_match_reward(AnswerId a, AnswerId a_ref);

/// Conditional expectation reward by full enumeration of the solution space:
///
///   sum_s pi(s|q) pi(a|s,q) pi(a_ref|s,q) / sum_s pi(s|q) pi(a|s,q)
///
/// The joint weights are formed in log space and shifted by their maximum, so
/// the denominator never underflows for finite logits.
double exact_cer(const PolicyParams& params, QuestionId q, AnswerId a, AnswerId a_ref,
                 std::size_t cap = kDefaultEnumerationCap);

/// Signature shared by exact_cer and any stand-in used by the verification
/// sweeps.
using CerFunction = std::function<double(const PolicyParams&, QuestionId, AnswerId, AnswerId)>;

struct EmpiricalCer {
  double value = 0.0;
  /// Every weight pi(a|s_j,q) underflowed to zero; value is then 0.
  bool degenerate = false;
};

/// Self-normalized Monte Carlo estimate of CER over the given solutions.
/// Throws InputDomainError when `solutions` is empty.
EmpiricalCer empirical_cer(const PolicyParams& params, QuestionId q, AnswerId a, AnswerId a_ref,
                           std::span<const Solution> solutions);

/// Tensorized per-question reward computation, R = D^-1 W P.
struct RewardBatch {
  std::vector<AnswerId> answers;             // a_i, length N
  std::vector<std::size_t> subset;           // indices of the M shared solutions
  std::vector<std::vector<double>> W;        // [N][M], pi(a_i | s_j, q)
  std::vector<double> P;                     // [M], pi(a_ref | s_j, q)
  std::vector<double> D;                     // [N], row sums of W
  std::vector<double> R;                     // [N], rewards
  std::vector<std::size_t> degenerate_rows;  // rows whose weights all underflowed

  std::size_t rows() const { return R.size(); }
  std::size_t columns() const { return P.size(); }
  bool is_degenerate(std::size_t row) const;
  /// Row i of D^-1 W. All zeros for degenerate rows.
  std::vector<double> normalized_row(std::size_t row) const;
};

struct BatchOptions {
  /// Score each distinct answer once and copy the row to its duplicates.
  bool dedup = true;
};

/// Scores `answers` against an explicit solution set. The rows of W follow
/// `answers`; the columns follow `solutions`.
RewardBatch score_answers(const PolicyParams& params, QuestionId q, std::span<const AnswerId> answers,
                          AnswerId a_ref, std::span<const Solution> solutions,
                          BatchOptions options = {});

/// Draws one uniform M-subset of the rollout solutions (without replacement,
/// kept in rollout order), shares it across all N rows and scores every
/// rollout's answer against it. Throws InputDomainError unless 1 <= M <= N.
RewardBatch batch_cer(const PolicyParams& params, QuestionId q, std::span<const Rollout> rollouts,
                      AnswerId a_ref, std::size_t M, RngStream& rng, BatchOptions options = {});

/// Element-wise (exact_match(a_i, a_ref) + R_i) / 2.
std::vector<double> combine_rewards(std::span<const AnswerId> answers, AnswerId a_ref,
                                    std::span<const double> cer_rewards);

/// batch_cer followed by combine_rewards.
std::vector<double> combined_reward(const PolicyParams& params, QuestionId q,
                                    std::span<const Rollout> rollouts, AnswerId a_ref, std::size_t M,
                                    RngStream& rng, BatchOptions options = {});

/// CSV report of a batch: header `answer_label,R,w_1..w_M`, one row per
/// rollout holding R_i and row i of D^-1 W, then a final `P_row` line holding P.
/// Numbers use 17 significant digits.
std::string explain_batch(const RewardBatch& batch);

/// printf("%.17g"), shared by every CSV writer.
std::string format_double(double value);

}  // namespace cerlab
