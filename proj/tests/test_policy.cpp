// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "doctest.h"

#include "cerlab/error.hpp"
#include "cerlab/policy.hpp"
#include "support.hpp"

using namespace cerlab;
using cerlab::testing::naive_answer_prob;
using cerlab::testing::naive_solution_prob;
using cerlab::testing::random_params;

namespace {

Solution sol(std::initializer_list<std::size_t> tokens) {
  Solution s;
  for (auto t : tokens) s.tokens.emplace_back(t);
  return s;
}

std::vector<TokenId> prefix(std::initializer_list<std::size_t> tokens) { return sol(tokens).tokens; }

double joint_logprob(const PolicyParams& p, QuestionId q, const Solution& s, AnswerId a) {
  return solution_logprob(p, q, s) + std::log(answer_prob(p, q, s, a));
}

}  // namespace

TEST_CASE("prefix and solution indices") {
  CHECK(prefix_index(prefix({}), 4) == 0);
  CHECK(prefix_index(prefix({0}), 4) == 1);
  CHECK(prefix_index(prefix({2, 1}), 4) == 14);
  CHECK(solution_index(sol({0, 0, 0}), 4, 3) == 0);
  CHECK(solution_index(sol({3, 3, 3}), 4, 3) == 63);
  CHECK(solution_index(sol({1, 0, 2}), 4, 3) == 18);

  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(solution_index(solution_from_index(i, 4, 3), 4, 3) == i);
  }
  CHECK_THROWS_AS(solution_index(sol({4, 0, 0}), 4, 3), InputDomainError);
  CHECK_THROWS_AS(solution_index(sol({0, 0}), 4, 3), InputDomainError);
  CHECK_THROWS_AS(prefix_index(prefix({5}), 4), InputDomainError);
}

TEST_CASE("prefix rows are laid out breadth first") {
  // Every proper prefix of length < L gets a distinct row in [0, P_count).
  const std::size_t V = 3, L = 3;
  std::vector<bool> seen(PolicyShape{1, V, L, 2}.prefix_count(), false);
  for (std::size_t len = 0; len < L; ++len) {
    std::size_t count = 1;
    for (std::size_t k = 0; k < len; ++k) count *= V;
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<TokenId> p;
      for (std::size_t k = 0, x = i; k < len; ++k, x /= V) p.insert(p.begin(), TokenId(x % V));
      const std::size_t row = prefix_index(p, V);
      REQUIRE(row < seen.size());
      CHECK_FALSE(seen[row]);
      seen[row] = true;
    }
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
}

TEST_CASE("policy shape validation") {
  CHECK(PolicyShape{1, 4, 2, 8}.prefix_count() == 5);
  CHECK(PolicyShape{1, 4, 2, 8}.solution_count() == 16);
  CHECK(PolicyShape{1, 1, 3, 2}.prefix_count() == 3);  // V = 1 has no geometric closed form
  CHECK_THROWS_AS(PolicyParams(PolicyShape{0, 2, 1, 2}), InputDomainError);
  CHECK_THROWS_AS(PolicyParams(PolicyShape{1, 2, 1, 2}, 0.0), InputDomainError);
  CHECK_THROWS_AS(PolicyParams(PolicyShape{1, 2, 1, 2}, -1.0), InputDomainError);
  CHECK_THROWS_AS(PolicyShape({1, 4, 7, 2}).validate(kDefaultEnumerationCap), EnumerationTooLarge);
  CHECK_NOTHROW(PolicyShape({1, 4, 6, 2}).validate(kDefaultEnumerationCap));

  PolicyParams p(PolicyShape{1, 2, 1, 2});
  p.answer_logits()[0] = std::nan("");
  CHECK_THROWS_AS(p.check_finite(), InputDomainError);
}

TEST_CASE("solution log-probabilities") {
  SUBCASE("uniform policy") {
    const PolicyParams p(PolicyShape{1, 2, 2, 2});
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(solution_logprob(p, QuestionId(0), solution_from_index(i, 2, 2)) ==
            doctest::Approx(std::log(0.25)).epsilon(1e-15));
    }
  }
  SUBCASE("dominant path") {
    PolicyParams p(PolicyShape{1, 3, 2, 2});
    p.solution_row(QuestionId(0), 0)[2] = 1e4;
    p.solution_row(QuestionId(0), prefix_index(prefix({2}), 3))[1] = 1e4;
    CHECK(std::abs(solution_logprob(p, QuestionId(0), sol({2, 1}))) < 1e-12);
  }
  SUBCASE("hand-evaluated softmax") {
    PolicyParams p(PolicyShape{1, 2, 1, 2});
    p.solution_row(QuestionId(0), 0)[0] = std::log(3.0);
    CHECK(solution_logprob(p, QuestionId(0), sol({0})) == doctest::Approx(std::log(0.75)).epsilon(1e-14));
  }
  SUBCASE("agrees with a hand walk of the prefix tree") {
    const PolicyParams p = random_params(PolicyShape{2, 3, 3, 2}, 4, 1.5, 0.7);
    const auto all = solution_logprobs(p, QuestionId(1));
    for (std::size_t i = 0; i < all.size(); ++i) {
      const double expected = std::log(naive_solution_prob(p, QuestionId(1), i));
      CHECK(all[i] == doctest::Approx(expected).epsilon(1e-12));
      CHECK(solution_logprob(p, QuestionId(1), solution_from_index(i, 3, 3)) ==
            doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("answer probabilities") {
  const PolicyParams zero(PolicyShape{1, 2, 1, 4});
  for (std::size_t a = 0; a < 4; ++a) {
    CHECK(answer_prob(zero, QuestionId(0), sol({1}), AnswerId(a)) == doctest::Approx(0.25).epsilon(1e-15));
  }

  PolicyParams p(PolicyShape{1, 2, 1, 2});
  p.answer_row(QuestionId(0), 0)[1] = std::log(3.0);
  CHECK(answer_prob(p, QuestionId(0), sol({0}), AnswerId(1)) == doctest::Approx(0.75).epsilon(1e-14));

  PolicyParams hot(PolicyShape{1, 2, 1, 5}, 1e6);
  for (std::size_t a = 0; a < 5; ++a) hot.answer_row(QuestionId(0), 0)[a] = static_cast<double>(a) * 0.5 - 1.0;
  for (std::size_t a = 0; a < 5; ++a) {
    CHECK(std::abs(answer_prob(hot, QuestionId(0), sol({0}), AnswerId(a)) - 0.2) <= 1e-6);
  }

  CHECK_THROWS_AS(answer_prob(zero, QuestionId(0), sol({0}), AnswerId(4)), InputDomainError);
  CHECK_THROWS_AS(answer_prob(zero, QuestionId(1), sol({0}), AnswerId(0)), InputDomainError);
}

TEST_CASE("every softmax row and the solution law are normalized") {
  const PolicyParams p = random_params(PolicyShape{2, 4, 6, 3}, 11, 2.0);
  for (std::size_t q = 0; q < 2; ++q) {
    for (std::size_t r = 0; r < p.shape().prefix_count(); ++r) {
      const auto probs = softmax(p.solution_row(QuestionId(q), r), p.temperature());
      CHECK(std::abs(std::accumulate(probs.begin(), probs.end(), 0.0) - 1.0) <= 1e-12);
    }
    for (std::size_t s = 0; s < p.shape().solution_count(); ++s) {
      const auto probs = softmax(p.answer_row(QuestionId(q), s), p.temperature());
      CHECK(std::abs(std::accumulate(probs.begin(), probs.end(), 0.0) - 1.0) <= 1e-12);
    }
    const auto logps = solution_logprobs(p, QuestionId(q));
    REQUIRE(logps.size() == 4096);
    double total = 0.0;
    for (double lp : logps) total += std::exp(lp);
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
  CHECK_THROWS_AS(solution_logprobs(p, QuestionId(0), 1000), EnumerationTooLarge);
}

TEST_CASE("enumerate_solutions") {
  const auto two = enumerate_solutions(2, 1);
  REQUIRE(two.size() == 2);
  CHECK(two[0] == sol({0}));
  CHECK(two[1] == sol({1}));
  const auto four = enumerate_solutions(2, 2);
  REQUIRE(four.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(solution_index(four[i], 2, 2) == i);
  CHECK(enumerate_solutions(4, 3).size() == 64);
  CHECK_THROWS_AS(enumerate_solutions(4, 7), EnumerationTooLarge);
}

TEST_CASE("sampling") {
  SUBCASE("near-deterministic policy") {
    PolicyParams p(PolicyShape{1, 2, 2, 3});
    p.solution_row(QuestionId(0), 0)[1] = 1e4;
    p.solution_row(QuestionId(0), prefix_index(prefix({1}), 2))[0] = 1e4;
    p.answer_row(QuestionId(0), solution_index(sol({1, 0}), 2, 2))[2] = 1e4;
    RngStream rng(StreamKey{1, 0, 0, StreamRole::Rollout, 0});
    int hits = 0;
    for (int i = 0; i < 10000; ++i) {
      const Rollout r = sample_rollout(p, QuestionId(0), rng);
      hits += (r.solution == sol({1, 0}) && r.answer == AnswerId(2)) ? 1 : 0;
    }
    CHECK(hits >= 9990);
  }
  SUBCASE("uniform law") {
    const PolicyParams p(PolicyShape{1, 2, 1, 2});
    RngStream rng(StreamKey{2, 0, 0, StreamRole::Rollout, 0});
    std::map<std::pair<std::size_t, std::size_t>, int> counts;
    for (int i = 0; i < 10000; ++i) {
      const Rollout r = sample_rollout(p, QuestionId(0), rng);
      ++counts[{r.solution.tokens[0].value, r.answer.value}];
    }
    REQUIRE(counts.size() == 4);
    for (const auto& [outcome, n] : counts) CHECK(std::abs(n / 10000.0 - 0.25) <= 0.02);
  }
  SUBCASE("same key, same draws") {
    const PolicyParams p = random_params(PolicyShape{2, 3, 2, 4}, 5);
    RngStream a(StreamKey{7, 1, 3, StreamRole::Rollout, 0});
    RngStream b(StreamKey{7, 1, 3, StreamRole::Rollout, 0});
    for (int i = 0; i < 200; ++i) CHECK(sample_rollout(p, QuestionId(1), a) == sample_rollout(p, QuestionId(1), b));
  }
  SUBCASE("chi-square goodness of fit against enumerated probabilities") {
    const PolicyParams p = random_params(PolicyShape{1, 2, 2, 2}, 21);
    RngStream rng(StreamKey{3, 0, 0, StreamRole::Rollout, 0});
    const int draws = 10000;
    std::vector<double> observed(8, 0.0);
    for (int i = 0; i < draws; ++i) {
      const Rollout r = sample_rollout(p, QuestionId(0), rng);
      observed[solution_index(r.solution, 2, 2) * 2 + r.answer.value] += 1.0;
    }
    double chi2 = 0.0;
    for (std::size_t s = 0; s < 4; ++s) {
      for (std::size_t a = 0; a < 2; ++a) {
        const double expected =
            draws * naive_solution_prob(p, QuestionId(0), s) * naive_answer_prob(p, QuestionId(0), s, a);
        chi2 += (observed[s * 2 + a] - expected) * (observed[s * 2 + a] - expected) / expected;
      }
    }
    CHECK(chi2 < cerlab::testing::chi_square_critical(7));
  }
}

TEST_CASE("log-probability gradient") {
  SUBCASE("uniform two-way row") {
    const PolicyParams p(PolicyShape{1, 2, 1, 2});
    const auto g = grad_logprob_rollout(p, QuestionId(0), sol({0}), AnswerId(0));
    const auto* row = g.find({LogitTable::Solution, 0, 0});
    REQUIRE(row != nullptr);
    CHECK((*row)[0] == 0.5);
    CHECK((*row)[1] == -0.5);
  }

  SUBCASE("rows are zero-sum") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const PolicyParams p = random_params(PolicyShape{2, 3, 3, 5}, seed, 2.0, 0.8);
      RngStream rng(StreamKey{seed, 0, 0, StreamRole::Rollout, 1});
      const Rollout r = sample_rollout(p, QuestionId(seed % 2), rng);
      const auto g = grad_logprob_rollout(p, QuestionId(seed % 2), r.solution, r.answer);
      CHECK(g.rows().size() == 4);  // L solution rows plus one answer row
      for (const auto& [key, row] : g.rows()) {
        CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0)) <= 1e-12);
      }
    }
  }

  SUBCASE("central finite differences on 20 random instances") {
    const double h = 1e-5;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const double temperature = seed % 3 == 0 ? 0.7 : 1.0;
      PolicyParams p = random_params(PolicyShape{2, 3, 2, 4}, 100 + seed, 1.0, temperature);
      RngStream rng(StreamKey{seed, 0, 0, StreamRole::Rollout, 2});
      const QuestionId q(seed % 2);
      const Rollout r = sample_rollout(p, q, rng);
      const auto g = grad_logprob_rollout(p, q, r.solution, r.answer);

      double diff2 = 0.0, norm2 = 0.0;
      const auto check_table = [&](LogitTable table, std::span<double> flat, std::size_t width,
                                   std::size_t rows_per_q) {
        for (std::size_t i = 0; i < flat.size(); ++i) {
          const double saved = flat[i];
          flat[i] = saved + h;
          const double up = joint_logprob(p, q, r.solution, r.answer);
          flat[i] = saved - h;
          const double down = joint_logprob(p, q, r.solution, r.answer);
          flat[i] = saved;
          const double fd = (up - down) / (2.0 * h);
          const std::size_t row = i / width;
          const auto* analytic = g.find({table, row / rows_per_q, row % rows_per_q});
          const double an = analytic ? (*analytic)[i % width] : 0.0;
          diff2 += (an - fd) * (an - fd);
          norm2 += an * an;
        }
      };
      check_table(LogitTable::Solution, p.solution_logits(), 3, p.shape().prefix_count());
      check_table(LogitTable::Answer, p.answer_logits(), 4, p.shape().solution_count());
      CHECK(std::sqrt(diff2 / norm2) <= 1e-6);
    }
  }
}

TEST_CASE("apply_update") {
  const PolicyParams base = random_params(PolicyShape{2, 2, 2, 3}, 9);
  LogProbGradient g = grad_logprob_rollout(base, QuestionId(1), sol({1, 0}), AnswerId(2));

  CHECK(apply_update(base, g, 0.0) == base);

  LogProbGradient single;
  const std::vector<double> half{0.5, 0.0};
  single.add_row({LogitTable::Solution, 0, 0}, half);
  const PolicyParams stepped = apply_update(base, single, 1.0);
  CHECK(stepped.solution_logits()[0] == base.solution_logits()[0] + 0.5);
  CHECK(std::equal(stepped.solution_logits().begin() + 1, stepped.solution_logits().end(),
                   base.solution_logits().begin() + 1));

  LogProbGradient other = grad_logprob_rollout(base, QuestionId(0), sol({0, 1}), AnswerId(0));
  const PolicyParams ab = apply_update(apply_update(base, g, 0.37), other, -1.9);
  const PolicyParams ba = apply_update(apply_update(base, other, -1.9), g, 0.37);
  CHECK(ab == ba);

  CHECK_THROWS_AS(apply_update(base, g, std::nan("")), UpdateRejected);
  LogProbGradient bad;
  const std::vector<double> inf{std::numeric_limits<double>::infinity(), 0.0};
  bad.add_row({LogitTable::Solution, 0, 0}, inf);
  PolicyParams untouched = base;
  CHECK_THROWS_AS(apply_update_in_place(untouched, bad, 1.0), UpdateRejected);
  CHECK(untouched == base);
  LogProbGradient wide;
  const std::vector<double> three{0.1, 0.2, -0.3};
  wide.add_row({LogitTable::Solution, 0, 0}, three);
  CHECK_THROWS_AS(apply_update(base, wide, 1.0), UpdateRejected);
  LogProbGradient outside;
  outside.add_row({LogitTable::Answer, 5, 0}, three);
  CHECK_THROWS_AS(apply_update(base, outside, 1.0), UpdateRejected);
}
