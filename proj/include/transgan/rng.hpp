// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "transgan/precision.hpp"

TRANSGAN_BEGIN_NAMESPACE

/// Seeded random stream whose complete state is (seed, draws).
///
/// Only raw engine output is consumed; the floating-point transforms are
/// done here rather than through <random> distributions so that the state
/// can be restored exactly from a checkpoint by replaying the draw count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  static Rng restore(std::uint64_t seed, std::uint64_t draws);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller; no cached second value.
  double normal();
  /// Normal with standard deviation `stddev`, resampled outside +-2 stddev.
  double truncated_normal(double stddev);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.seed_ == b.seed_ && a.draws_ == b.draws_;
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_ = 0;
  std::uint64_t draws_ = 0;
};

TRANSGAN_END_NAMESPACE
