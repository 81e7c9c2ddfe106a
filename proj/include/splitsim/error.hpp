// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace splitsim {

// Error taxonomy mirrored by the CLI exit codes: configuration 2, I/O 3,
// contract violation 4.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

inline void contract(bool condition, const std::string& what) {
  if (!condition) throw ContractViolation(what);
}

}  // namespace splitsim
