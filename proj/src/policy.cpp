// SPDX-License-Identifier: Apache-2.0

#include "cerlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "cerlab/error.hpp"

namespace cerlab {

namespace {

// V^L, or max() on overflow.
std::size_t checked_power(std::size_t base, std::size_t exponent) {
  std::size_t result = 1;
  for (std::size_t i = 0; i < exponent; ++i) {
    if (base != 0 && result > std::numeric_limits<std::size_t>::max() / base) {
      return std::numeric_limits<std::size_t>::max();
    }
    result *= base;
  }
  return result;
}

}  // namespace

std::size_t PolicyShape::solution_count() const { return checked_power(vocab, length); }

std::size_t PolicyShape::prefix_count() const {
  std::size_t total = 0;
  std::size_t level = 1;
  for (std::size_t k = 0; k < length; ++k) {
    total += level;
    level *= vocab;
  }
  return total;
}

void PolicyShape::validate(std::size_t max_solutions) const {
  if (questions == 0 || vocab == 0 || length == 0 || answers == 0) {
    throw InputDomainError("policy shape: Q, V, L and A must all be at least 1");
  }
  const std::size_t count = solution_count();
  if (count > max_solutions) {
    throw EnumerationTooLarge("policy shape: V^L = " +
                              (count == std::numeric_limits<std::size_t>::max()
                                   ? std::string("overflow")
                                   : std::to_string(count)) +
                              " exceeds the enumeration cap " + std::to_string(max_solutions));
  }
}

PolicyParams::PolicyParams(PolicyShape shape, double temperature)
    : shape_(shape), temperature_(temperature) {
  shape_.validate(std::numeric_limits<std::size_t>::max() - 1);
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InputDomainError("policy: temperature must be positive and finite");
  }
  solution_logits_.assign(shape_.questions * shape_.prefix_count() * shape_.vocab, 0.0);
  answer_logits_.assign(shape_.questions * shape_.solution_count() * shape_.answers, 0.0);
}

std::span<const double> PolicyParams::solution_row(QuestionId q, std::size_t prefix) const {
  const std::size_t row = q.value * shape_.prefix_count() + prefix;
  return std::span<const double>(solution_logits_).subspan(row * shape_.vocab, shape_.vocab);
}

std::span<double> PolicyParams::solution_row(QuestionId q, std::size_t prefix) {
  const std::size_t row = q.value * shape_.prefix_count() + prefix;
  return std::span<double>(solution_logits_).subspan(row * shape_.vocab, shape_.vocab);
}

std::span<const double> PolicyParams::answer_row(QuestionId q, std::size_t solution) const {
  const std::size_t row = q.value * shape_.solution_count() + solution;
  return std::span<const double>(answer_logits_).subspan(row * shape_.answers, shape_.answers);
}

std::span<double> PolicyParams::answer_row(QuestionId q, std::size_t solution) {
  const std::size_t row = q.value * shape_.solution_count() + solution;
  return std::span<double>(answer_logits_).subspan(row * shape_.answers, shape_.answers);
}

void PolicyParams::check_finite() const {
  const auto finite = [](double x) { return std::isfinite(x); };
  if (!std::all_of(solution_logits_.begin(), solution_logits_.end(), finite) ||
      !std::all_of(answer_logits_.begin(), answer_logits_.end(), finite)) {
    throw InputDomainError("policy: non-finite logit");
  }
}

std::size_t prefix_index(std::span<const TokenId> prefix, std::size_t vocab) {
  std::size_t offset = 0;  // number of prefixes shorter than this one
  std::size_t level = 1;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    offset += level;
    level *= vocab;
  }
  std::size_t within = 0;
  for (TokenId t : prefix) {
    if (t.value >= vocab) {
      throw InputDomainError("prefix_index: token " + std::to_string(t.value) +
                             " out of range for vocabulary " + std::to_string(vocab));
    }
    within = within * vocab + t.value;
  }
  return offset + within;
}

std::size_t solution_index(const Solution& s, std::size_t vocab, std::size_t length) {
  if (s.tokens.size() != length) {
    throw InputDomainError("solution_index: solution length mismatch");
  }
  std::size_t index = 0;
  for (TokenId t : s.tokens) {
    if (t.value >= vocab) {
      throw InputDomainError("solution_index: token out of range");
    }
    index = index * vocab + t.value;
  }
  return index;
}

Solution solution_from_index(std::size_t index, std::size_t vocab, std::size_t length) {
  Solution s;
  s.tokens.resize(length);
  for (std::size_t i = length; i-- > 0;) {
    s.tokens[i] = TokenId(index % vocab);
    index /= vocab;
  }
  return s;
}

std::vector<double> log_softmax(std::span<const double> logits, double temperature) {
  std::vector<double> out(logits.size());
  double max_scaled = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < logits.size(); ++c) {
    out[c] = logits[c] / temperature;
    max_scaled = std::max(max_scaled, out[c]);
  }
  double sum = 0.0;
  for (double y : out) {
    sum += std::exp(y - max_scaled);
  }
  const double log_norm = max_scaled + std::log(sum);
  for (double& y : out) {
    y -= log_norm;
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  std::vector<double> out = log_softmax(logits, temperature);
  for (double& y : out) {
    y = std::exp(y);
  }
  return out;
}

namespace {

void check_question(const PolicyParams& params, QuestionId q) {
  if (q.value >= params.shape().questions) {
    throw InputDomainError("question id " + std::to_string(q.value) + " out of range");
  }
}

void check_answer(const PolicyParams& params, AnswerId a) {
  if (a.value >= params.shape().answers) {
    throw InputDomainError("answer id " + std::to_string(a.value) + " out of range");
  }
}

}  // namespace

double solution_logprob(const PolicyParams& params, QuestionId q, const Solution& s) {
  check_question(params, q);
  const PolicyShape& shape = params.shape();
  solution_index(s, shape.vocab, shape.length);  // validates s
  const std::span<const TokenId> tokens(s.tokens);
  double total = 0.0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const std::size_t row = prefix_index(tokens.first(t), shape.vocab);
    const std::vector<double> logp = log_softmax(params.solution_row(q, row), params.temperature());
    total += logp[tokens[t].value];
  }
  return total;
}

std::vector<double> solution_logprobs(const PolicyParams& params, QuestionId q, std::size_t cap) {
  check_question(params, q);
  const PolicyShape& shape = params.shape();
  shape.validate(cap);
  // Breadth-first over prefix levels; level k holds log pi(prefix) for all V^k prefixes.
  std::vector<double> level{0.0};
  std::size_t level_offset = 0;
  for (std::size_t k = 0; k < shape.length; ++k) {
    std::vector<double> next(level.size() * shape.vocab);
    for (std::size_t p = 0; p < level.size(); ++p) {
      const std::vector<double> logp =
          log_softmax(params.solution_row(q, level_offset + p), params.temperature());
      for (std::size_t v = 0; v < shape.vocab; ++v) {
        next[p * shape.vocab + v] = level[p] + logp[v];
      }
    }
    level_offset += level.size();
    level = std::move(next);
  }
  return level;
}

double answer_logprob(const PolicyParams& params, QuestionId q, std::size_t solution, AnswerId a) {
  check_question(params, q);
  check_answer(params, a);
  return log_softmax(params.answer_row(q, solution), params.temperature())[a.value];
}

double answer_prob(const PolicyParams& params, QuestionId q, const Solution& s, AnswerId a) {
  const PolicyShape& shape = params.shape();
  return std::exp(answer_logprob(params, q, solution_index(s, shape.vocab, shape.length), a));
}

Solution sample_solution(const PolicyParams& params, QuestionId q, RngStream& rng) {
  check_question(params, q);
  const PolicyShape& shape = params.shape();
  Solution s;
  s.tokens.reserve(shape.length);
  std::size_t row = 0;
  for (std::size_t t = 0; t < shape.length; ++t) {
    const std::vector<double> probs = softmax(params.solution_row(q, row), params.temperature());
    const std::size_t token = rng.categorical(probs);
    s.tokens.emplace_back(token);
    // Children of prefix `row` at depth t sit at row * V + 1 + token.
    row = row * shape.vocab + 1 + token;
  }
  return s;
}

Rollout sample_rollout(const PolicyParams& params, QuestionId q, RngStream& rng) {
  Solution s = sample_solution(params, q, rng);
  const PolicyShape& shape = params.shape();
  const std::size_t index = solution_index(s, shape.vocab, shape.length);
  const std::vector<double> probs = softmax(params.answer_row(q, index), params.temperature());
  const AnswerId a(rng.categorical(probs));
  return Rollout{std::move(s), a};
}

std::vector<Solution> enumerate_solutions(std::size_t vocab, std::size_t length, std::size_t cap) {
  PolicyShape shape;
  shape.vocab = vocab;
  shape.length = length;
  shape.validate(cap);
  const std::size_t count = shape.solution_count();
  std::vector<Solution> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(solution_from_index(i, vocab, length));
  }
  return out;
}

void LogProbGradient::add_row(const RowKey& key, std::span<const double> values, double scale) {
  auto [it, inserted] = rows_.try_emplace(key, values.size(), 0.0);
  std::vector<double>& row = it->second;
  if (row.size() != values.size()) {
    throw InputDomainError("gradient row width mismatch");
  }
  for (std::size_t c = 0; c < values.size(); ++c) {
    row[c] += scale * values[c];
  }
}

void LogProbGradient::add_scaled(const LogProbGradient& other, double scale) {
  for (const auto& [key, values] : other.rows_) {
    add_row(key, values, scale);
  }
}

const std::vector<double>* LogProbGradient::find(const RowKey& key) const {
  const auto it = rows_.find(key);
  return it == rows_.end() ? nullptr : &it->second;
}

namespace {

// d log softmax(z / T)[t] / dz_c = (1[c = t] - p_c) / T
std::vector<double> softmax_row_gradient(std::span<const double> logits, double temperature,
                                         std::size_t realized) {
  std::vector<double> grad = softmax(logits, temperature);
  for (std::size_t c = 0; c < grad.size(); ++c) {
    grad[c] = ((c == realized ? 1.0 : 0.0) - grad[c]) / temperature;
  }
  return grad;
}

}  // namespace

LogProbGradient grad_logprob_rollout(const PolicyParams& params, QuestionId q, const Solution& s,
                                     AnswerId a) {
  check_question(params, q);
  check_answer(params, a);
  const PolicyShape& shape = params.shape();
  const std::size_t index = solution_index(s, shape.vocab, shape.length);
  LogProbGradient grad;
  std::size_t row = 0;
  for (std::size_t t = 0; t < shape.length; ++t) {
    const std::size_t token = s.tokens[t].value;
    grad.add_row({LogitTable::Solution, q.value, row},
                 softmax_row_gradient(params.solution_row(q, row), params.temperature(), token));
    row = row * shape.vocab + 1 + token;
  }
  grad.add_row({LogitTable::Answer, q.value, index},
               softmax_row_gradient(params.answer_row(q, index), params.temperature(), a.value));
  return grad;
}

void apply_update_in_place(PolicyParams& params, const LogProbGradient& grad, double scale) {
  if (!std::isfinite(scale)) {
    throw UpdateRejected("apply_update: non-finite scale");
  }
  const PolicyShape& shape = params.shape();
  // Validate everything before touching params so a rejected update leaves them intact.
  for (const auto& [key, values] : grad.rows()) {
    const auto& [table, question, slot] = key;
    const bool is_solution = table == LogitTable::Solution;
    const std::size_t slots = is_solution ? shape.prefix_count() : shape.solution_count();
    const std::size_t width = is_solution ? shape.vocab : shape.answers;
    if (question >= shape.questions || slot >= slots || values.size() != width) {
      throw UpdateRejected("apply_update: gradient row does not match policy layout");
    }
    const std::span<const double> row = is_solution
                                            ? std::as_const(params).solution_row(QuestionId(question), slot)
                                            : std::as_const(params).answer_row(QuestionId(question), slot);
    for (std::size_t c = 0; c < width; ++c) {
      if (!std::isfinite(values[c])) {
        throw UpdateRejected("apply_update: non-finite gradient entry");
      }
      if (!std::isfinite(row[c] + scale * values[c])) {
        throw UpdateRejected("apply_update: update overflows a logit");
      }
    }
  }
  for (const auto& [key, values] : grad.rows()) {
    const auto& [table, question, slot] = key;
    std::span<double> row = table == LogitTable::Solution
                                ? params.solution_row(QuestionId(question), slot)
                                : params.answer_row(QuestionId(question), slot);
    for (std::size_t c = 0; c < values.size(); ++c) {
      const double delta = scale * values[c];
      if (delta != 0.0) {
        row[c] += delta;
      }
    }
  }
}

PolicyParams apply_update(PolicyParams params, const LogProbGradient& grad, double scale) {
  apply_update_in_place(params, grad, scale);
  return params;
}

}  // namespace cerlab
