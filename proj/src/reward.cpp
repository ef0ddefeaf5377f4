// SPDX-License-Identifier: Apache-2.0

#include "cerlab/reward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "cerlab/error.hpp"

namespace cerlab {

std::string_view to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::ExactMatch:
      return "exact_match";
    case RewardKind::CerExact:
      return "cer_exact";
    case RewardKind::CerEmpirical:
      return "cer_empirical";
    case RewardKind::Combined:
      return "combined";
  }
  return "unknown";
}

RewardKind parse_reward_kind(std::string_view name) {
  for (RewardKind kind : {RewardKind::ExactMatch, RewardKind::CerExact, RewardKind::CerEmpirical,
                          RewardKind::Combined}) {
    if (name == to_string(kind)) {
      return kind;
    }
  }
  throw ConfigError("unknown reward kind '" + std::string(name) + "'");
}

double exact_match_reward(AnswerId a, AnswerId a_ref) { return a == a_ref ? 1.0 : 0.0; }

namespace {

struct RowScore {
  double reward = 0.0;
  double row_sum = 0.0;  // sum of the unshifted weights
  bool degenerate = false;
};

// Self-normalized ratio sum_j w_j P_j / sum_j w_j with w_j = exp(log_w[j]).
// The ratio is evaluated on exp(log_w - max log_w); sums run left to right.
RowScore score_row(std::span<const double> log_w, std::span<const double> P,
                   std::span<double> raw_weights) {
  RowScore out;
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < log_w.size(); ++j) {
    raw_weights[j] = std::exp(log_w[j]);
    out.row_sum += raw_weights[j];
    max_log = std::max(max_log, log_w[j]);
  }
  if (out.row_sum == 0.0 || !std::isfinite(max_log)) {
    out.degenerate = true;
    return out;
  }
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t j = 0; j < log_w.size(); ++j) {
    const double w = std::exp(log_w[j] - max_log);
    numerator += w * P[j];
    denominator += w;
  }
  out.reward = numerator / denominator;
  return out;
}

void check_ids(const PolicyParams& params, QuestionId q, AnswerId a) {
  if (q.value >= params.shape().questions) {
    throw InputDomainError("question id " + std::to_string(q.value) + " out of range");
  }
  if (a.value >= params.shape().answers) {
    throw InputDomainError("answer id " + std::to_string(a.value) + " out of range");
  }
}

// Answer log-probabilities for each solution, one vector per column.
std::vector<std::vector<double>> column_log_probs(const PolicyParams& params, QuestionId q,
                                                  std::span<const Solution> solutions) {
  const PolicyShape& shape = params.shape();
  std::vector<std::vector<double>> columns;
  columns.reserve(solutions.size());
  for (const Solution& s : solutions) {
    const std::size_t index = solution_index(s, shape.vocab, shape.length);
    columns.push_back(log_softmax(params.answer_row(q, index), params.temperature()));
  }
  return columns;
}

}  // namespace

double exact_cer(const PolicyParams& params, QuestionId q, AnswerId a, AnswerId a_ref,
                 std::size_t cap) {
  check_ids(params, q, a);
  check_ids(params, q, a_ref);
  const std::vector<double> log_s = solution_logprobs(params, q, cap);
  std::vector<double> log_joint(log_s.size());
  std::vector<double> p_ref(log_s.size());
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < log_s.size(); ++s) {
    const std::vector<double> logp = log_softmax(params.answer_row(q, s), params.temperature());
    log_joint[s] = log_s[s] + logp[a.value];
    p_ref[s] = std::exp(logp[a_ref.value]);
    max_log = std::max(max_log, log_joint[s]);
  }
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t s = 0; s < log_s.size(); ++s) {
    const double w = std::exp(log_joint[s] - max_log);
    numerator += w * p_ref[s];
    denominator += w;
  }
  return numerator / denominator;
}

EmpiricalCer empirical_cer(const PolicyParams& params, QuestionId q, AnswerId a, AnswerId a_ref,
                           std::span<const Solution> solutions) {
  check_ids(params, q, a);
  check_ids(params, q, a_ref);
  if (solutions.empty()) {
    throw InputDomainError("empirical_cer: solution list is empty");
  }
  const auto columns = column_log_probs(params, q, solutions);
  std::vector<double> log_w(columns.size());
  std::vector<double> P(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    log_w[j] = columns[j][a.value];
    P[j] = std::exp(columns[j][a_ref.value]);
  }
  std::vector<double> raw(columns.size());
  const RowScore row = score_row(log_w, P, raw);
  return EmpiricalCer{row.reward, row.degenerate};
}

bool RewardBatch::is_degenerate(std::size_t row) const {
  return std::find(degenerate_rows.begin(), degenerate_rows.end(), row) != degenerate_rows.end();
}

std::vector<double> RewardBatch::normalized_row(std::size_t row) const {
  std::vector<double> out(W.at(row).size(), 0.0);
  if (D.at(row) == 0.0) {
    return out;
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = W[row][j] / D[row];
  }
  return out;
}

RewardBatch score_answers(const PolicyParams& params, QuestionId q, std::span<const AnswerId> answers,
                          AnswerId a_ref, std::span<const Solution> solutions,
                          BatchOptions options) {
  check_ids(params, q, a_ref);
  for (AnswerId a : answers) {
    check_ids(params, q, a);
  }
  if (solutions.empty()) {
    throw InputDomainError("score_answers: solution set is empty");
  }
  const std::size_t n = answers.size();
  const std::size_t m = solutions.size();
  const auto columns = column_log_probs(params, q, solutions);

  RewardBatch batch;
  batch.answers.assign(answers.begin(), answers.end());
  batch.P.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    batch.P[j] = std::exp(columns[j][a_ref.value]);
  }
  batch.W.assign(n, std::vector<double>(m, 0.0));
  batch.D.assign(n, 0.0);
  batch.R.assign(n, 0.0);

  std::map<std::size_t, std::size_t> first_row_of_answer;
  std::vector<double> log_w(m);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = answers[i].value;
    if (options.dedup) {
      const auto [it, inserted] = first_row_of_answer.try_emplace(a, i);
      if (!inserted) {
        const std::size_t source = it->second;
        batch.W[i] = batch.W[source];
        batch.D[i] = batch.D[source];
        batch.R[i] = batch.R[source];
        if (batch.is_degenerate(source)) {
          batch.degenerate_rows.push_back(i);
        }
        continue;
      }
    }
    for (std::size_t j = 0; j < m; ++j) {
      log_w[j] = columns[j][a];
    }
    const RowScore row = score_row(log_w, batch.P, batch.W[i]);
    batch.D[i] = row.row_sum;
    batch.R[i] = row.reward;
    if (row.degenerate) {
      batch.degenerate_rows.push_back(i);
    }
  }
  return batch;
}

RewardBatch batch_cer(const PolicyParams& params, QuestionId q, std::span<const Rollout> rollouts,
                      AnswerId a_ref, std::size_t M, RngStream& rng, BatchOptions options) {
  const std::size_t n = rollouts.size();
  if (M < 1 || M > n) {
    throw InputDomainError("batch_cer: subset size M=" + std::to_string(M) +
                           " must lie in [1, N=" + std::to_string(n) + "]");
  }
  // Partial Fisher-Yates draw, then restore rollout order so that M == N
  // reproduces the plain left-to-right sum over all rollouts.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = i;
  }
  if (M < n) {
    for (std::size_t i = 0; i < M; ++i) {
      const std::size_t pick = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(order[i], order[pick]);
    }
  }
  order.resize(M);
  std::sort(order.begin(), order.end());

  std::vector<Solution> solutions;
  solutions.reserve(M);
  for (std::size_t j : order) {
    solutions.push_back(rollouts[j].solution);
  }
  std::vector<AnswerId> answers;
  answers.reserve(n);
  for (const Rollout& r : rollouts) {
    answers.push_back(r.answer);
  }
  RewardBatch batch = score_answers(params, q, answers, a_ref, solutions, options);
  batch.subset = std::move(order);
  return batch;
}

std::vector<double> combine_rewards(std::span<const AnswerId> answers, AnswerId a_ref,
                                    std::span<const double> cer_rewards) {
  if (answers.size() != cer_rewards.size()) {
    throw InputDomainError("combine_rewards: length mismatch");
  }
  std::vector<double> out(answers.size());
  for (std::size_t i = 0; i < answers.size(); ++i) {
    out[i] = (exact_match_reward(answers[i], a_ref) + cer_rewards[i]) / 2.0;
  }
  return out;
}

std::vector<double> combined_reward(const PolicyParams& params, QuestionId q,
                                    std::span<const Rollout> rollouts, AnswerId a_ref, std::size_t M,
                                    RngStream& rng, BatchOptions options) {
  const RewardBatch batch = batch_cer(params, q, rollouts, a_ref, M, rng, options);
  return combine_rewards(batch.answers, a_ref, batch.R);
}

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string explain_batch(const RewardBatch& batch) {
  std::ostringstream out;
  out << "answer_label,R";
  for (std::size_t j = 0; j < batch.columns(); ++j) {
    out << ",w_" << (j + 1);
  }
  out << '\n';
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    out << "a=" << batch.answers.at(i).value << ',' << format_double(batch.R[i]);
    for (double w : batch.normalized_row(i)) {
      out << ',' << format_double(w);
    }
    out << '\n';
  }
  out << "P_row,";
  for (double p : batch.P) {
    out << ',' << format_double(p);
  }
  out << '\n';
  return out.str();
}

}  // namespace cerlab
