// SPDX-License-Identifier: Apache-2.0

#include "cerlab/rng.hpp"

#include <limits>

#include "cerlab/error.hpp"

namespace cerlab {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(const StreamKey& key) {
  std::uint64_t h = mix64(key.seed);
  h = mix64(h ^ key.question);
  h = mix64(h ^ key.step);
  h = mix64(h ^ static_cast<std::uint64_t>(key.role));
  h = mix64(h ^ key.slot);
  return h;
}

RngStream::RngStream(const StreamKey& key) : engine_(stream_seed(key)) {}

double RngStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) {
    throw InputDomainError("RngStream::below: n must be positive");
  }
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) {
    x = engine_();
  }
  return x % n;
}

double RngStream::normal() { return normal_(engine_); }

std::size_t RngStream::categorical(std::span<const double> weights) {
  if (weights.empty()) {
    throw InputDomainError("RngStream::categorical: empty weight vector");
  }
  double total = 0.0;
  for (double w : weights) {
    total += w;
  }
  const double u = uniform() * total;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cumulative += weights[i];
    if (u < cumulative) {
      return i;
    }
  }
  // Rounding can leave u just above the final partial sum.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) {
      return i;
    }
  }
  return weights.size() - 1;
}

}  // namespace cerlab
