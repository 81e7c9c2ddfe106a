// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <string>

namespace splitsim {

/// Shortest decimal representation that round-trips the exact double; keeps
/// CSV and JSON artifacts byte-deterministic.
inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace splitsim
