// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace cerlab {

/// Purpose of a random stream. Part of the stream key, so two consumers that
/// share (seed, question, step) still draw independent numbers.
enum class StreamRole : std::uint64_t {
  TaskReference = 1,
  PolicyInit = 2,
  QuestionDraw = 3,
  EpochShuffle = 4,
  Rollout = 5,
  RewardSubset = 6,
  FreshSolutions = 7,
  Evaluation = 8,
  VerifyPolicy = 9,
  McStudy = 10,
  Explain = 11,
};

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t question = 0;
  std::uint64_t step = 0;
  StreamRole role = StreamRole::Rollout;
  std::uint64_t slot = 0;
};

/// Deterministic random stream derived from a StreamKey. The same key always
/// yields the same sequence, independent of thread scheduling.
class RngStream {
 public:
  explicit RngStream(const StreamKey& key);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal deviate.
  double normal();
  /// Index drawn from non-negative `weights` (need not be normalized).
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Engine seed derived from every field of the key. Also used to hand a
/// distinct seed to each policy of a sweep.
std::uint64_t stream_seed(const StreamKey& key);

/// 64-bit finalizer used to mix key fields into an engine seed.
std::uint64_t mix64(std::uint64_t x);

}  // namespace cerlab
