// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used by the tests. Nothing here calls
// the library's probability code: every quantity is rebuilt from the raw
// logits with plain exp/sum loops.

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cerlab/policy.hpp"
#include "cerlab/rng.hpp"
#include "cerlab/tasks.hpp"

namespace cerlab::testing {

inline std::vector<double> naive_softmax(std::span<const double> logits, double temperature) {
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] / temperature);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

/// pi(s|q) for solution index `idx`, walking the prefix tree by hand.
inline double naive_solution_prob(const PolicyParams& params, QuestionId q, std::size_t idx) {
  const PolicyShape& sh = params.shape();
  std::vector<std::size_t> digits(sh.length);
  for (std::size_t k = sh.length; k-- > 0;) {
    digits[k] = idx % sh.vocab;
    idx /= sh.vocab;
  }
  double prob = 1.0;
  std::size_t row = 0;
  for (std::size_t k = 0; k < sh.length; ++k) {
    prob *= naive_softmax(params.solution_row(q, row), params.temperature())[digits[k]];
    row = row * sh.vocab + 1 + digits[k];
  }
  return prob;
}

inline double naive_answer_prob(const PolicyParams& params, QuestionId q, std::size_t idx, std::size_t a) {
  return naive_softmax(params.answer_row(q, idx), params.temperature())[a];
}

/// rho(a, a_ref) straight from its definition, without any max shift.
inline double naive_cer(const PolicyParams& params, QuestionId q, std::size_t a, std::size_t a_ref) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t s = 0; s < params.shape().solution_count(); ++s) {
    const double ps = naive_solution_prob(params, q, s);
    const double pa = naive_answer_prob(params, q, s, a);
    num += ps * pa * naive_answer_prob(params, q, s, a_ref);
    den += ps * pa;
  }
  return num / den;
}

inline double naive_marginal(const PolicyParams& params, QuestionId q, std::size_t a) {
  double total = 0.0;
  for (std::size_t s = 0; s < params.shape().solution_count(); ++s) {
    total += naive_solution_prob(params, q, s) * naive_answer_prob(params, q, s, a);
  }
  return total;
}

inline PolicyParams random_params(PolicyShape shape, std::uint64_t seed, double sigma = 1.0,
                                  double temperature = 1.0) {
  PolicyParams params(shape, temperature);
  RngStream rng(StreamKey{seed, 0, 0, StreamRole::VerifyPolicy, 99});
  for (double& x : params.solution_logits()) x = sigma * rng.normal();
  for (double& x : params.answer_logits()) x = sigma * rng.normal();
  return params;
}

/// Two equally likely solutions; s0 always answers a0, s1 answers a0 or a1
/// with probability 1/2 each. Hand values: rho(a0,a0) = 5/6, rho(a1,a0) = 1/2,
/// P(a0|q) = 3/4.
inline PolicyParams two_solution_instance() {
  PolicyParams params(PolicyShape{1, 2, 1, 2});
  auto s0 = params.answer_row(QuestionId(0), 0);
  s0[0] = 0.0;
  s0[1] = -1e4;  // exp underflows to exactly 0
  return params;
}

inline TaskSpec single_question_task(PolicyShape shape, std::size_t reference) {
  TaskSpec task;
  task.shape = shape;
  task.reference.assign(shape.questions, AnswerId(reference));
  task.distribution.assign(shape.questions, 1.0 / static_cast<double>(shape.questions));
  return task;
}

/// Upper 1e-3 quantile of chi-square, Wilson-Hilferty approximation.
inline double chi_square_critical(std::size_t dof) {
  const double k = static_cast<double>(dof);
  const double z = 3.090232306167813;  // standard normal 0.999 quantile
  const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * t * t * t;
}

}  // namespace cerlab::testing
