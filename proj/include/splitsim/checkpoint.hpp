// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "json.hpp"
#include "splitsim/dataset.hpp"
#include "splitsim/orchestrator.hpp"
#include "splitsim/split_network.hpp"

namespace splitsim {

/// Everything needed to resume or evaluate a trained model. JSON on disk:
/// format_version, dims, params (name -> shape + row-major values), adam
/// (per node, mirrored to the parameter names), normalizer, config echo.
/// save -> load -> save is byte-identical.
struct Checkpoint {
  int format_version = 1;
  SplitNetwork net;
  AdamState edge_adam;
  AdamState drone_adam;
  AdamState server_adam;
  NormStats normalizer;
  nlohmann::json config_echo;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace splitsim
