// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "cerlab/rng.hpp"
#include "cerlab/types.hpp"

namespace cerlab {

/// Tabular autoregressive policy over (question -> solution of L tokens -> one
/// answer token).
///
/// solution_logits holds one row of V logits per (question, proper prefix);
/// answer_logits holds one row of A logits per (question, full solution).
/// Every next-token distribution is softmax(row / temperature).
class PolicyParams {
 public:
  explicit PolicyParams(PolicyShape shape, double temperature = 1.0);

  const PolicyShape& shape() const { return shape_; }
  double temperature() const { return temperature_; }

  std::span<const double> solution_row(QuestionId q, std::size_t prefix) const;
  std::span<double> solution_row(QuestionId q, std::size_t prefix);
  std::span<const double> answer_row(QuestionId q, std::size_t solution) const;
  std::span<double> answer_row(QuestionId q, std::size_t solution);

  /// Flat storage, row-major [Q][P_count][V] and [Q][V^L][A].
  std::span<const double> solution_logits() const { return solution_logits_; }
  std::span<double> solution_logits() { return solution_logits_; }
  std::span<const double> answer_logits() const { return answer_logits_; }
  std::span<double> answer_logits() { return answer_logits_; }

  /// Throws InputDomainError if any logit is non-finite.
  void check_finite() const;

  bool operator==(const PolicyParams&) const = default;

 private:
  PolicyShape shape_;
  double temperature_;
  std::vector<double> solution_logits_;
  std::vector<double> answer_logits_;
};

/// One sampled (solution, answer) pair.
struct Rollout {
  Solution solution;
  AnswerId answer;

  bool operator==(const Rollout&) const = default;
};

std::size_t prefix_index(std::span<const TokenId> prefix, std::size_t vocab);
std::size_t solution_index(const Solution& s, std::size_t vocab, std::size_t length);
Solution solution_from_index(std::size_t index, std::size_t vocab, std::size_t length);

/// log softmax(logits / temperature), computed with a max shift.
std::vector<double> log_softmax(std::span<const double> logits, double temperature);
std::vector<double> softmax(std::span<const double> logits, double temperature);

double solution_logprob(const PolicyParams& params, QuestionId q, const Solution& s);
/// log pi(s|q) for every solution in index order. Requires V^L <= cap.
std::vector<double> solution_logprobs(const PolicyParams& params, QuestionId q,
                                      std::size_t cap = kDefaultEnumerationCap);

double answer_prob(const PolicyParams& params, QuestionId q, const Solution& s, AnswerId a);
double answer_logprob(const PolicyParams& params, QuestionId q, std::size_t solution, AnswerId a);

Solution sample_solution(const PolicyParams& params, QuestionId q, RngStream& rng);
Rollout sample_rollout(const PolicyParams& params, QuestionId q, RngStream& rng);

/// All V^L solutions in solution_index order; throws EnumerationTooLarge above `cap`.
std::vector<Solution> enumerate_solutions(std::size_t vocab, std::size_t length,
                                          std::size_t cap = kDefaultEnumerationCap);

enum class LogitTable { Solution = 0, Answer = 1 };

/// Sparse gradient with respect to PolicyParams. Each entry is one full softmax
/// row, keyed by (table, question, row slot). Rows are kept ordered so that
/// iteration and accumulation are reproducible.
class LogProbGradient {
 public:
  using RowKey = std::tuple<LogitTable, std::size_t, std::size_t>;

  /// Adds `scale * values` into the row, creating it on first touch.
  void add_row(const RowKey& key, std::span<const double> values, double scale = 1.0);
  /// this += scale * other.
  void add_scaled(const LogProbGradient& other, double scale);

  const std::map<RowKey, std::vector<double>>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  const std::vector<double>* find(const RowKey& key) const;

 private:
  std::map<RowKey, std::vector<double>> rows_;
};

/// Gradient of log pi(a, s | q) with respect to every logit.
LogProbGradient grad_logprob_rollout(const PolicyParams& params, QuestionId q, const Solution& s,
                                     AnswerId a);

/// logits += scale * grad. Throws UpdateRejected on a non-finite scale or
/// gradient entry, or on rows that do not fit the params.
PolicyParams apply_update(PolicyParams params, const LogProbGradient& grad, double scale);
void apply_update_in_place(PolicyParams& params, const LogProbGradient& grad, double scale);

}  // namespace cerlab
