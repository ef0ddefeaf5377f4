// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"

#include "cerlab/error.hpp"
#include "cerlab/oracle.hpp"
#include "cerlab/serialization.hpp"
#include "cerlab/tasks.hpp"
#include "support.hpp"

using namespace cerlab;
using cerlab::testing::chi_square_critical;

TEST_CASE("generated tasks") {
  CHECK(generate_task(9, 8, 4, 2, 8) == generate_task(9, 8, 4, 2, 8));
  CHECK_FALSE(generate_task(9, 8, 4, 2, 8) == generate_task(10, 8, 4, 2, 8));

  const TaskSpec single = generate_task(3, 1, 2, 2, 4);
  CHECK(single.distribution == std::vector<double>{1.0});
  CHECK(single.reference.size() == 1);
  CHECK_NOTHROW(single.validate());

  CHECK_THROWS_AS(generate_task(0, 1, 4, 7, 2), EnumerationTooLarge);
  CHECK_THROWS_AS(generate_task(0, 0, 4, 2, 2), InputDomainError);
}

TEST_CASE("reference answers are uniform across seeds") {
  std::vector<double> counts(8, 0.0);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (AnswerId a : generate_task(seed, 8, 4, 2, 8).reference) counts[a.value] += 1.0;
  }
  const double expected = 800.0 / 8.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < chi_square_critical(7));
}

TEST_CASE("task validation") {
  TaskSpec task = generate_task(1, 4, 3, 2, 6);
  CHECK_NOTHROW(task.validate());

  TaskSpec bad = task;
  bad.distribution = {0.5, 0.5, 0.5, -0.5};
  CHECK_THROWS_AS(bad.validate(), InputDomainError);
  bad.distribution = {0.25, 0.25, 0.25, 0.25 + 1e-9};
  CHECK_THROWS_AS(bad.validate(), InputDomainError);
  bad = task;
  bad.reference.pop_back();
  CHECK_THROWS_AS(bad.validate(), InputDomainError);
  bad = task;
  bad.reference[0] = AnswerId(6);
  CHECK_THROWS_AS(bad.validate(), InputDomainError);

  bad = task;
  bad.alias_groups = contiguous_alias_groups(6, 4);
  CHECK_NOTHROW(bad.validate());
  CHECK(bad.alias_group_of() == std::vector<std::size_t>{0, 0, 0, 0, 1, 1});
  bad.alias_groups = AliasGroups{{AnswerId(0), AnswerId(1)}, {AnswerId(1), AnswerId(2)}};
  CHECK_THROWS_AS(bad.validate(), InputDomainError);
  bad.alias_groups = AliasGroups{{AnswerId(0), AnswerId(1), AnswerId(2)}};
  CHECK_THROWS_AS(bad.validate(), InputDomainError);
  bad.alias_groups = AliasGroups{{}, {AnswerId(0), AnswerId(1), AnswerId(2), AnswerId(3), AnswerId(4), AnswerId(5)}};
  CHECK_THROWS_AS(bad.validate(), InputDomainError);
}

TEST_CASE("policy initializers") {
  const TaskSpec task = generate_task(2, 3, 3, 2, 4);
  const PolicyParams zero = init_policy(task, InitSpec{InitKind::Zero, 0.0}, 1);
  for (std::size_t q = 0; q < 3; ++q) {
    for (std::size_t s = 0; s < 9; ++s) {
      for (std::size_t a = 0; a < 4; ++a) {
        CHECK(answer_prob(zero, QuestionId(q), solution_from_index(s, 3, 2), AnswerId(a)) == 0.25);
      }
    }
  }
  CHECK(init_policy(task, InitSpec{InitKind::Gaussian, 0.0}, 1) == zero);
  const PolicyParams g1 = init_policy(task, InitSpec{InitKind::Gaussian, 0.5}, 77);
  CHECK(init_policy(task, InitSpec{InitKind::Gaussian, 0.5}, 77) == g1);
  CHECK_FALSE(init_policy(task, InitSpec{InitKind::Gaussian, 0.5}, 78) == g1);
  CHECK_THROWS_AS(init_policy(task, InitSpec{InitKind::Gaussian, -1.0}, 1), InputDomainError);
}

TEST_CASE("aliased initializer") {
  TaskSpec task = generate_task(4, 2, 3, 2, 6);
  CHECK_THROWS_AS(init_policy_aliased(task, 1.0, 0.5, 1), InputDomainError);
  task.alias_groups = contiguous_alias_groups(6, 3);

  CHECK(init_policy_aliased(task, 1.0, 0.0, 5) == init_policy(task, InitSpec{InitKind::Gaussian, 1.0}, 5));
  CHECK_THROWS_AS(init_policy_aliased(task, 1.0, 1.5, 5), InputDomainError);

  const PolicyParams tied = init_policy_aliased(task, 1.0, 1.0, 5);
  for (std::size_t s = 0; s < 9; ++s) {
    const Solution sol = solution_from_index(s, 3, 2);
    for (std::size_t a = 1; a < 3; ++a) {
      CHECK(std::abs(answer_prob(tied, QuestionId(1), sol, AnswerId(a)) -
                     answer_prob(tied, QuestionId(1), sol, AnswerId(0))) <= 1e-12);
      CHECK(std::abs(answer_prob(tied, QuestionId(1), sol, AnswerId(3 + a)) -
                     answer_prob(tied, QuestionId(1), sol, AnswerId(3))) <= 1e-12);
    }
  }
}

TEST_CASE("fully tied aliases share the reference's reward") {
  // With identical in-group likelihoods, conditioning on a or on a_ref picks the
  // same solution posterior, so rho(a, a_ref) = rho(a_ref, a_ref).
  std::size_t positive = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    TaskSpec task = generate_task(seed, 1, 4, 2, 8);
    task.alias_groups = contiguous_alias_groups(8, 4);
    const PolicyParams p = init_policy_aliased(task, 1.0, 1.0, seed);
    const AnswerId ref = task.reference[0];
    const std::size_t group = ref.value / 4;
    const AnswerId mate((ref.value % 4 == 0 ? 1 : 0) + group * 4);
    const double self = exact_cer(p, QuestionId(0), ref, ref);
    const double alias = exact_cer(p, QuestionId(0), mate, ref);
    CHECK(std::abs(alias - self) <= 1e-12);
    positive += alias > 0.0 ? 1 : 0;
  }
  CHECK(positive >= 45);
}

TEST_CASE("in-group wrong answers outscore out-of-group ones") {
  double in_sum = 0.0, out_sum = 0.0;
  std::size_t in_n = 0, out_n = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    TaskSpec task = generate_task(seed, 2, 4, 2, 8);
    task.alias_groups = contiguous_alias_groups(8, 4);
    const auto group_of = task.alias_group_of();
    const PolicyParams p = init_policy_aliased(task, 1.0, 0.9, seed);
    for (std::size_t q = 0; q < 2; ++q) {
      const AnswerId ref = task.reference[q];
      for (std::size_t a = 0; a < 8; ++a) {
        if (a == ref.value) continue;
        const double r = exact_cer(p, QuestionId(q), AnswerId(a), ref);
        if (group_of[a] == group_of[ref.value]) {
          in_sum += r;
          ++in_n;
        } else {
          out_sum += r;
          ++out_n;
        }
      }
    }
  }
  CHECK(in_sum / static_cast<double>(in_n) > out_sum / static_cast<double>(out_n));
}

TEST_CASE("task and policy documents round-trip") {
  TaskSpec task = generate_task(12, 3, 2, 3, 5);
  task.distribution = {0.2, 0.3, 0.5};
  task.alias_groups = contiguous_alias_groups(5, 2);
  CHECK(task_from_json(task_to_json(task)) == task);
  // A reparsed text document must reproduce every double exactly.
  CHECK(task_from_json(nlohmann::json::parse(task_to_json(task).dump())) == task);

  const PolicyParams p = cerlab::testing::random_params(task.shape, 6, 3.0, 0.9);
  CHECK(policy_from_json(nlohmann::json::parse(policy_to_json(p).dump())) == p);

  auto doc = policy_to_json(p);
  doc["format"] = "something-else";
  CHECK_THROWS_AS(policy_from_json(doc), InputDomainError);
  doc = policy_to_json(p);
  doc["version"] = 99;
  CHECK_THROWS_AS(policy_from_json(doc), InputDomainError);
  doc = policy_to_json(p);
  doc["answer_logits"].erase(0);
  CHECK_THROWS_AS(policy_from_json(doc), InputDomainError);
  auto tdoc = task_to_json(task);
  tdoc["reference"][0] = 17;
  CHECK_THROWS_AS(task_from_json(tdoc), InputDomainError);
  CHECK_THROWS_AS(load_json("/nonexistent/cerlab/file.json"), InputDomainError);
}
