// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "splitsim/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return splitsim::cli::run(args);
}
