// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace splitsim::cli {

/// Runs one CLI invocation (args exclude the program name). Exit codes:
/// 0 success, 2 configuration error, 3 I/O error, 4 contract violation.
int run(const std::vector<std::string>& args);

}  // namespace splitsim::cli
