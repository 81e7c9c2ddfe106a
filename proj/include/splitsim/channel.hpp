// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "splitsim/layers.hpp"
#include "splitsim/rng.hpp"

namespace splitsim {

enum class Link { EdgeServer, EdgeDrone, DroneServer };

const char* link_name(Link link);

struct ChannelSpec {
  Link link;
  double erasure_prob;  // in [0, 1]
};

/// Binary erasure pattern over a (steps x width) representation; 0 marks an
/// erased symbol, 1 a surviving one.
class ErasureMask {
 public:
  ErasureMask(std::size_t steps, std::size_t width, std::uint8_t fill = 1)
      : steps_(steps), width_(width), bits_(steps * width, fill) {}

  static ErasureMask all_ones(std::size_t steps, std::size_t width) {
    return ErasureMask(steps, width, 1);
  }
  static ErasureMask all_zeros(std::size_t steps, std::size_t width) {
    return ErasureMask(steps, width, 0);
  }

  std::size_t steps() const { return steps_; }
  std::size_t width() const { return width_; }

  std::uint8_t operator()(std::size_t t, std::size_t m) const {
    return bits_[t * width_ + m];
  }
  std::uint8_t& operator()(std::size_t t, std::size_t m) {
    return bits_[t * width_ + m];
  }

  const std::vector<std::uint8_t>& bits() const { return bits_; }

 private:
  std::size_t steps_;
  std::size_t width_;
  std::vector<std::uint8_t> bits_;
};

/// Each symbol independently erased with probability p. Fresh mask per
/// transmission; the caller owns the generator.
ErasureMask sample_mask(Rng& rng, double erasure_prob, std::size_t steps,
                        std::size_t width);

/// z_hat = z (*) q: erased positions become exactly 0.0, survivors are
/// bit-identical to the input. No inverted-dropout rescaling in either
/// training or testing.
Sequence apply_mask(const Sequence& z, const ErasureMask& mask);

/// Reverse-mode rule for z_hat = z (*) q: dz = dz_hat (*) q, with the mask
/// used on the corresponding forward pass.
Sequence mask_gradient(const Sequence& dz, const ErasureMask& mask);

}  // namespace splitsim
