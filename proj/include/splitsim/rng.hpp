// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace splitsim {

// splitmix64 mix of (base, salt); used to derive independent, reproducible
// sub-streams (per layer, per link, per sweep cell) from one master seed.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

// Seeded generator with hand-rolled output conversions so that a given seed
// produces the same stream on every platform (std distributions are
// implementation-defined; mt19937_64 itself is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; consumes exactly two uniforms per call.
  double normal(double mean, double stddev);

 private:
  std::mt19937_64 engine_;
};

}  // namespace splitsim
