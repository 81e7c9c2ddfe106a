// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/channel.hpp"

#include <string>

#include "splitsim/error.hpp"

namespace splitsim {

namespace {

void check_shape(const Sequence& z, const ErasureMask& mask, const char* op) {
  contract(z.size() == mask.steps(),
           std::string(op) + ": sequence has " + std::to_string(z.size()) +
               " steps, mask has " + std::to_string(mask.steps()));
  for (const Vector& row : z) {
    contract(row.size() == mask.width(),
             std::string(op) + ": row width " + std::to_string(row.size()) +
                 " vs mask width " + std::to_string(mask.width()));
  }
}

}  // namespace

const char* link_name(Link link) {
  switch (link) {
    case Link::EdgeServer: return "edge_server";
    case Link::EdgeDrone: return "edge_drone";
    case Link::DroneServer: return "drone_server";
  }
  return "unknown";
}

ErasureMask sample_mask(Rng& rng, double erasure_prob, std::size_t steps,
                        std::size_t width) {
  contract(erasure_prob >= 0.0 && erasure_prob <= 1.0,
           "sample_mask: erasure probability " + std::to_string(erasure_prob) +
               " outside [0, 1]");
  ErasureMask mask(steps, width);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t m = 0; m < width; ++m) {
      // uniform() < p erases; p = 0 and p = 1 degenerate correctly because
      // uniform() lies in [0, 1).
      mask(t, m) = rng.uniform() < erasure_prob ? 0 : 1;
    }
  }
  return mask;
}

Sequence apply_mask(const Sequence& z, const ErasureMask& mask) {
  check_shape(z, mask, "channel apply");
  Sequence out(z.size());
  for (std::size_t t = 0; t < z.size(); ++t) {
    out[t].resize(z[t].size());
    for (std::size_t m = 0; m < z[t].size(); ++m) {
      out[t][m] = mask(t, m) ? z[t][m] : 0.0;
    }
  }
  return out;
}

Sequence mask_gradient(const Sequence& dz, const ErasureMask& mask) {
  check_shape(dz, mask, "mask_gradient");
  Sequence out(dz.size());
  for (std::size_t t = 0; t < dz.size(); ++t) {
    out[t].resize(dz[t].size());
    for (std::size_t m = 0; m < dz[t].size(); ++m) {
      out[t][m] = mask(t, m) ? dz[t][m] : 0.0;
    }
  }
  return out;
}

}  // namespace splitsim
