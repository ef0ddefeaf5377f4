// SPDX-License-Identifier: Apache-2.0

#include "cerlab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cerlab/error.hpp"
#include "cerlab/tasks.hpp"

namespace cerlab {

nlohmann::json TheoremReport::to_json() const {
  return nlohmann::json{{"name", name}, {"instance", instance}, {"lhs", lhs}, {"rhs", rhs},
                        {"gap", gap},   {"tol", tolerance},     {"pass", pass}};
}

namespace {

CerFunction resolve(const CerFunction& cer) {
  if (cer) {
    return cer;
  }
  return [](const PolicyParams& p, QuestionId q, AnswerId a, AnswerId a_ref) {
    return exact_cer(p, q, a, a_ref);
  };
}

}  // namespace

double marginal_answer_prob(const PolicyParams& params, QuestionId q, AnswerId a, std::size_t cap) {
  if (a.value >= params.shape().answers) {
    throw InputDomainError("marginal_answer_prob: answer out of range");
  }
  const std::vector<double> log_s = solution_logprobs(params, q, cap);
  double total = 0.0;
  for (std::size_t s = 0; s < log_s.size(); ++s) {
    total += std::exp(log_s[s] + answer_logprob(params, q, s, a));
  }
  return total;
}

LikelihoodMoments reference_likelihood_moments(const PolicyParams& params, QuestionId q,
                                               AnswerId a_ref, std::size_t cap) {
  const std::vector<double> log_s = solution_logprobs(params, q, cap);
  LikelihoodMoments m;
  for (std::size_t s = 0; s < log_s.size(); ++s) {
    const double weight = std::exp(log_s[s]);
    const double p = std::exp(answer_logprob(params, q, s, a_ref));
    m.mean += weight * p;
    m.second += weight * p * p;
  }
  return m;
}

TheoremReport check_theorem1(const PolicyParams& params, QuestionId q, AnswerId a_ref,
                             std::string instance, const CerFunction& cer) {
  const CerFunction rho = resolve(cer);
  const LikelihoodMoments m = reference_likelihood_moments(params, q, a_ref);
  TheoremReport report;
  report.name = "theorem1_self_consistency";
  report.instance = std::move(instance);
  report.lhs = rho(params, q, a_ref, a_ref);
  report.rhs = m.mean;
  report.gap = report.lhs - report.rhs;
  report.tolerance = kEnumerationTolerance;
  // When E[pi] underflows the ratio form is meaningless; only the inequality is checked.
  const bool identity_holds =
      m.mean == 0.0 || std::abs(report.lhs - m.second / m.mean) <= report.tolerance;
  report.pass = report.gap >= -report.tolerance && identity_holds;
  return report;
}

TheoremReport check_theorem2(const PolicyParams& params, QuestionId q, AnswerId a_ref,
                             std::string instance, const CerFunction& cer) {
  const CerFunction rho = resolve(cer);
  TheoremReport report;
  report.name = "theorem2_value_equivalence";
  report.instance = std::move(instance);
  for (std::size_t a = 0; a < params.shape().answers; ++a) {
    report.lhs += marginal_answer_prob(params, q, AnswerId(a)) * rho(params, q, AnswerId(a), a_ref);
  }
  report.rhs = marginal_answer_prob(params, q, a_ref);
  report.gap = report.lhs - report.rhs;
  report.tolerance = kEnumerationTolerance;
  report.pass = std::abs(report.gap) <= report.tolerance;
  return report;
}

TheoremReport check_theorem2_dataset(const PolicyParams& params, const TaskSpec& task,
                                     std::string instance, const CerFunction& cer) {
  TheoremReport report;
  report.name = "theorem2_dataset_equivalence";
  report.instance = std::move(instance);
  for (std::size_t q = 0; q < task.shape.questions; ++q) {
    const TheoremReport per_q =
        check_theorem2(params, QuestionId(q), task.reference.at(q), {}, cer);
    report.lhs += task.distribution.at(q) * per_q.lhs;
    report.rhs += task.distribution.at(q) * per_q.rhs;
  }
  report.gap = report.lhs - report.rhs;
  report.tolerance = kEnumerationTolerance;
  report.pass = std::abs(report.gap) <= report.tolerance;
  return report;
}

TheoremReport check_bounds(const PolicyParams& params, const TaskSpec& task, std::string instance,
                           const CerFunction& cer) {
  const CerFunction rho = resolve(cer);
  TheoremReport report;
  report.name = "cer_bounds";
  report.instance = std::move(instance);
  report.lhs = std::numeric_limits<double>::infinity();
  report.rhs = -std::numeric_limits<double>::infinity();
  bool all_finite = true;
  const PolicyShape& shape = task.shape;
  for (std::size_t q = 0; q < shape.questions; ++q) {
    for (std::size_t a = 0; a < shape.answers; ++a) {
      for (std::size_t ref = 0; ref < shape.answers; ++ref) {
        const double value = rho(params, QuestionId(q), AnswerId(a), AnswerId(ref));
        all_finite = all_finite && std::isfinite(value);
        report.lhs = std::min(report.lhs, value);
        report.rhs = std::max(report.rhs, value);
      }
    }
  }
  report.gap = std::max({0.0, -report.lhs, report.rhs - 1.0});
  report.tolerance = 0.0;
  report.pass = all_finite && report.gap <= report.tolerance;
  return report;
}

std::vector<McErrorRow> mc_error_study(const PolicyParams& params, QuestionId q, AnswerId a,
                                       AnswerId a_ref, std::span<const std::size_t> M_values,
                                       std::size_t trials, RngStream& rng) {
  if (trials < 100) {
    throw InputDomainError("mc_error_study: trials must be at least 100");
  }
  const double exact = exact_cer(params, q, a, a_ref);
  std::vector<McErrorRow> rows;
  std::vector<Solution> sample;
  for (std::size_t M : M_values) {
    if (M == 0) {
      throw InputDomainError("mc_error_study: M must be positive");
    }
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      sample.clear();
      for (std::size_t j = 0; j < M; ++j) {
        sample.push_back(sample_solution(params, q, rng));
      }
      const double err = std::abs(empirical_cer(params, q, a, a_ref, sample).value - exact);
      sum += err;
      sum_sq += err * err;
    }
    const double n = static_cast<double>(trials);
    const double mean = sum / n;
    const double variance = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    rows.push_back(McErrorRow{M, mean, std::sqrt(variance / n)});
  }
  return rows;
}

}  // namespace cerlab
