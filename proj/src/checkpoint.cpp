// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "splitsim/error.hpp"

namespace splitsim {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;
// Entry ranges of named_params(): edge, drone, server(+fc).
constexpr std::size_t kEdgeBegin = 0, kEdgeEnd = 16;
constexpr std::size_t kDroneBegin = 16, kDroneEnd = 48;
constexpr std::size_t kServerBegin = 48, kServerEnd = 98;

json dims_to_json(const NetworkDims& d) {
  return json{{"N", d.feature_count}, {"M", d.hidden},      {"H", d.hidden},
              {"T", d.steps},         {"L", NetworkDims::layer_count},
              {"input_width", d.input_width}};
}

NetworkDims dims_from_json(const json& j) {
  NetworkDims d;
  d.feature_count = j.at("N").get<std::size_t>();
  d.hidden = j.at("H").get<std::size_t>();
  d.steps = j.at("T").get<std::size_t>();
  d.input_width = j.at("input_width").get<std::size_t>();
  if (j.at("M").get<std::size_t>() != d.hidden) {
    throw ConfigError("checkpoint: M != H");
  }
  if (j.at("L").get<std::size_t>() != NetworkDims::layer_count) {
    throw ConfigError("checkpoint: unexpected layer count");
  }
  return d;
}

json adam_to_json(const AdamState& state,
                  const std::vector<ConstParamView>& views, std::size_t begin,
                  std::size_t end) {
  json m = json::object();
  json v = json::object();
  contract(state.m.size() == end - begin,
           "checkpoint: adam state arity does not match node parameters");
  for (std::size_t k = begin; k < end; ++k) {
    m[views[k].name] = state.m[k - begin];
    v[views[k].name] = state.v[k - begin];
  }
  return json{{"t", state.t}, {"m", std::move(m)}, {"v", std::move(v)}};
}

AdamState adam_from_json(const json& j, const std::vector<ParamView>& views,
                         std::size_t begin, std::size_t end) {
  AdamState state;
  state.t = j.at("t").get<std::uint64_t>();
  const json& m = j.at("m");
  const json& v = j.at("v");
  for (std::size_t k = begin; k < end; ++k) {
    const std::string& name = views[k].name;
    Vector mk = m.at(name).get<Vector>();
    Vector vk = v.at(name).get<Vector>();
    if (mk.size() != views[k].data->size() || vk.size() != views[k].data->size()) {
      throw ConfigError("checkpoint: adam moment shape mismatch for " + name);
    }
    state.m.push_back(std::move(mk));
    state.v.push_back(std::move(vk));
  }
  return state;
}

json normstats_to_json(const NormStats& stats) {
  json features = json::array();
  for (const auto& mm : stats.features) {
    features.push_back(json{{"min", mm.min}, {"max", mm.max}});
  }
  return json{{"features", std::move(features)},
              {"label", json{{"min", stats.label.min}, {"max", stats.label.max}}}};
}

NormStats normstats_from_json(const json& j) {
  NormStats stats;
  for (const json& mm : j.at("features")) {
    stats.features.push_back(
        {mm.at("min").get<double>(), mm.at("max").get<double>()});
  }
  stats.label = {j.at("label").at("min").get<double>(),
                 j.at("label").at("max").get<double>()};
  return stats;
}

}  // namespace

json checkpoint_to_json(const Checkpoint& ckpt) {
  const auto views = named_params(ckpt.net);
  json params = json::object();
  for (const auto& view : views) {
    params[view.name] = json{{"shape", view.shape}, {"values", *view.data}};
  }
  json adam{{"edge", adam_to_json(ckpt.edge_adam, views, kEdgeBegin, kEdgeEnd)},
            {"drone", adam_to_json(ckpt.drone_adam, views, kDroneBegin, kDroneEnd)},
            {"server", adam_to_json(ckpt.server_adam, views, kServerBegin, kServerEnd)}};
  return json{{"format_version", ckpt.format_version},
              {"dims", dims_to_json(ckpt.net.dims)},
              {"params", std::move(params)},
              {"adam", std::move(adam)},
              {"normalizer", normstats_to_json(ckpt.normalizer)},
              {"config", ckpt.config_echo}};
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint ckpt;
  ckpt.format_version = j.at("format_version").get<int>();
  if (ckpt.format_version != kFormatVersion) {
    throw ConfigError("checkpoint: format_version " +
                      std::to_string(ckpt.format_version) +
                      " not supported (expected " +
                      std::to_string(kFormatVersion) + ")");
  }
  const NetworkDims dims = dims_from_json(j.at("dims"));
  ckpt.net = init_split_network(0, dims);  // allocates; values overwritten below

  auto views = named_params(ckpt.net);
  const json& params = j.at("params");
  if (params.size() != views.size()) {
    throw ConfigError("checkpoint: expected " + std::to_string(views.size()) +
                      " parameter arrays, found " + std::to_string(params.size()));
  }
  for (auto& view : views) {
    const json& entry = params.at(view.name);
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != view.shape) {
      throw ConfigError("checkpoint: shape mismatch for " + view.name);
    }
    Vector values = entry.at("values").get<Vector>();
    if (values.size() != view.data->size()) {
      throw ConfigError("checkpoint: value count mismatch for " + view.name);
    }
    *view.data = std::move(values);
  }

  const json& adam = j.at("adam");
  ckpt.edge_adam = adam_from_json(adam.at("edge"), views, kEdgeBegin, kEdgeEnd);
  ckpt.drone_adam = adam_from_json(adam.at("drone"), views, kDroneBegin, kDroneEnd);
  ckpt.server_adam = adam_from_json(adam.at("server"), views, kServerBegin, kServerEnd);
  ckpt.normalizer = normstats_from_json(j.at("normalizer"));
  ckpt.config_echo = j.value("config", json::object());
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << checkpoint_to_json(ckpt).dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("checkpoint not found: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid checkpoint JSON in " + path + ": " + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError("invalid checkpoint structure in " + path + ": " + e.what());
  }
}

}  // namespace splitsim
