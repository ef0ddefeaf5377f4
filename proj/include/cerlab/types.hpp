// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace cerlab {

/// Index into one finite alphabet. The tag keeps question, token and answer
/// indices from being mixed up at call sites.
template <class Tag>
struct StrongIndex {
  std::size_t value = 0;

  constexpr StrongIndex() = default;
  constexpr explicit StrongIndex(std::size_t v) : value(v) {}

  constexpr auto operator<=>(const StrongIndex&) const = default;
};

using QuestionId = StrongIndex<struct QuestionTag>;
using TokenId = StrongIndex<struct TokenTag>;
using AnswerId = StrongIndex<struct AnswerTag>;

/// Fixed-length token sequence produced before the answer token.
struct Solution {
  std::vector<TokenId> tokens;

  bool operator==(const Solution&) const = default;
};

/// Default upper bound on V^L for anything that enumerates the solution space.
inline constexpr std::size_t kDefaultEnumerationCap = 4096;

/// Sizes of the tabular policy: Q questions, solution alphabet V, solution
/// length L and answer alphabet A.
struct PolicyShape {
  std::size_t questions = 1;
  std::size_t vocab = 2;
  std::size_t length = 1;
  std::size_t answers = 2;

  /// V^L.
  std::size_t solution_count() const;
  /// Number of proper prefixes including the empty one: 1 + V + ... + V^(L-1).
  std::size_t prefix_count() const;
  /// Throws InputDomainError on zero sizes or when V^L exceeds `max_solutions`.
  void validate(std::size_t max_solutions = kDefaultEnumerationCap) const;

  bool operator==(const PolicyShape&) const = default;
};

}  // namespace cerlab
