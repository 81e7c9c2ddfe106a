// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/split_network.hpp"

#include <algorithm>
#include <string>

#include "splitsim/error.hpp"

namespace splitsim {

namespace {

constexpr const char* kGateNames[4] = {"input", "forget", "cell", "output"};
constexpr const char* kArrayNames[4] = {"w_ih", "w_hh", "b_ih", "b_hh"};

template <typename NetT, typename VecPtr>
std::vector<ParamViewT<VecPtr>> named_params_impl(NetT& net) {
  std::vector<ParamViewT<VecPtr>> out;
  auto add_lstm = [&out](const std::string& prefix, auto& layer) {
    for (std::size_t g = 0; g < 4; ++g) {
      auto& gate = layer.gates[g];
      const std::string base = prefix + "." + kGateNames[g] + ".";
      out.push_back({base + kArrayNames[0],
                     {gate.w_ih.rows(), gate.w_ih.cols()}, &gate.w_ih.data()});
      out.push_back({base + kArrayNames[1],
                     {gate.w_hh.rows(), gate.w_hh.cols()}, &gate.w_hh.data()});
      out.push_back({base + kArrayNames[2], {gate.b_ih.size()}, &gate.b_ih});
      out.push_back({base + kArrayNames[3], {gate.b_hh.size()}, &gate.b_hh});
    }
  };
  add_lstm("edge.l0", net.edge);
  add_lstm("drone.l0", net.drone[0]);
  add_lstm("drone.l1", net.drone[1]);
  add_lstm("server.l0", net.server_lstm[0]);
  add_lstm("server.l1", net.server_lstm[1]);
  add_lstm("server.l2", net.server_lstm[2]);
  out.push_back({"server.fc.w",
                 {net.server_fc.w.rows(), net.server_fc.w.cols()},
                 &net.server_fc.w.data()});
  out.push_back({"server.fc.b", {net.server_fc.b.size()}, &net.server_fc.b});
  return out;
}

/// Runs the 3-layer server stack; returns the top hidden sequence.
Sequence run_server_stack(const SplitNetwork& net, const Sequence& input,
                          std::array<LstmCaches, 3>& caches) {
  const Vector zeros(net.dims.hidden, 0.0);
  Sequence h = input;
  for (std::size_t l = 0; l < 3; ++l) {
    auto [out, cache] = lstm_forward(net.server_lstm[l], h, zeros, zeros);
    caches[l] = std::move(cache);
    h = std::move(out);
  }
  return h;
}

Sequence zeros_like_seq(std::size_t steps, std::size_t width) {
  return Sequence(steps, Vector(width, 0.0));
}

}  // namespace

SplitNetwork init_split_network(std::uint64_t seed, const NetworkDims& dims) {
  contract(dims.hidden > 0 && dims.steps > 0 && dims.input_width > 0,
           "init_split_network: dims must be positive");
  SplitNetwork net;
  net.dims = dims;
  // The flat sample width is pinned by the encoding of sequence_from_sample.
  net.dims.feature_count = dims.steps + dims.input_width - 1;
  const LayerDims edge_dims{dims.input_width, dims.hidden};
  const LayerDims inner_dims{dims.hidden, dims.hidden};
  net.edge = init_lstm_params(mix_seed(seed, 0), edge_dims);
  net.drone[0] = init_lstm_params(mix_seed(seed, 1), inner_dims);
  net.drone[1] = init_lstm_params(mix_seed(seed, 2), inner_dims);
  net.server_lstm[0] = init_lstm_params(mix_seed(seed, 3), inner_dims);
  net.server_lstm[1] = init_lstm_params(mix_seed(seed, 4), inner_dims);
  net.server_lstm[2] = init_lstm_params(mix_seed(seed, 5), inner_dims);
  net.server_fc = init_fc_params(mix_seed(seed, 6), dims.hidden);
  return net;
}

std::vector<ParamView> named_params(SplitNetwork& net) {
  return named_params_impl<SplitNetwork, Vector*>(net);
}

std::vector<ConstParamView> named_params(const SplitNetwork& net) {
  return named_params_impl<const SplitNetwork, const Vector*>(net);
}

Sequence sequence_from_sample(const Vector& features, const NetworkDims& dims) {
  contract(features.size() == dims.feature_count,
           "sequence_from_sample: feature count " +
               std::to_string(features.size()) + " vs expected " +
               std::to_string(dims.feature_count));
  const std::size_t n_cov = dims.input_width - 1;
  Sequence seq(dims.steps, Vector(dims.input_width, 0.0));
  for (std::size_t t = 0; t < dims.steps; ++t) {
    seq[t][0] = features[t];
    for (std::size_t c = 0; c < n_cov; ++c) {
      seq[t][1 + c] = features[dims.steps + c];
    }
  }
  return seq;
}

ForwardRecord forward_direct(const SplitNetwork& net, const Sequence& x,
                             const ErasureMask& mask_es) {
  contract(x.size() == net.dims.steps,
           "forward_direct: input has " + std::to_string(x.size()) +
               " steps, network expects " + std::to_string(net.dims.steps));
  ForwardRecord rec;
  rec.path = Path::Direct;
  rec.mask_es = mask_es;

  const Vector zeros(net.dims.hidden, 0.0);
  auto [z, edge_caches] = lstm_forward(net.edge, x, zeros, zeros);
  rec.z = std::move(z);
  rec.edge_caches = std::move(edge_caches);

  rec.z_received = apply_mask(rec.z, mask_es);
  Sequence top = run_server_stack(net, rec.z_received, rec.server_caches);

  rec.y_full = fc_forward(net.server_fc, top.back());
  rec.y_fc = fc_forward(net.server_fc, rec.z_received.back());
  return rec;
}

ForwardRecord forward_relay(const SplitNetwork& net, const Sequence& x,
                            const ErasureMask& mask_ed,
                            const ErasureMask& mask_ds) {
  contract(x.size() == net.dims.steps,
           "forward_relay: input has " + std::to_string(x.size()) +
               " steps, network expects " + std::to_string(net.dims.steps));
  ForwardRecord rec;
  rec.path = Path::Relay;
  rec.mask_ed = mask_ed;
  rec.mask_ds = mask_ds;

  const Vector zeros(net.dims.hidden, 0.0);
  auto [z, edge_caches] = lstm_forward(net.edge, x, zeros, zeros);
  rec.z = std::move(z);
  rec.edge_caches = std::move(edge_caches);

  rec.drone_in = apply_mask(rec.z, mask_ed);
  Sequence h = rec.drone_in;
  for (std::size_t l = 0; l < 2; ++l) {
    auto [out, cache] = lstm_forward(net.drone[l], h, zeros, zeros);
    rec.drone_caches[l] = std::move(cache);
    h = std::move(out);
  }
  rec.drone_out = std::move(h);

  rec.z_received = apply_mask(rec.drone_out, mask_ds);
  Sequence top = run_server_stack(net, rec.z_received, rec.server_caches);

  rec.y_full = fc_forward(net.server_fc, top.back());
  rec.y_fc = fc_forward(net.server_fc, rec.z_received.back());
  return rec;
}

double compute_loss(double label, const ForwardRecord& rec) {
  const double e_full = label - rec.y_full;
  const double e_fc = label - rec.y_fc;
  return e_full * e_full + e_fc * e_fc;
}

SplitGrads zero_grads(const SplitNetwork& net) {
  SplitGrads g;
  g.edge = zero_like(net.edge);
  for (std::size_t l = 0; l < 2; ++l) g.drone[l] = zero_like(net.drone[l]);
  for (std::size_t l = 0; l < 3; ++l) g.server_lstm[l] = zero_like(net.server_lstm[l]);
  g.server_fc = zero_like(net.server_fc);
  return g;
}

namespace {

std::vector<Vector*> grad_arrays(SplitGrads& g) {
  std::vector<Vector*> out;
  auto append = [&out](std::vector<Vector*> arrays) {
    out.insert(out.end(), arrays.begin(), arrays.end());
  };
  append(param_arrays(g.edge));
  append(param_arrays(g.drone[0]));
  append(param_arrays(g.drone[1]));
  append(param_arrays(g.server_lstm[0]));
  append(param_arrays(g.server_lstm[1]));
  append(param_arrays(g.server_lstm[2]));
  append(param_arrays(g.server_fc));
  return out;
}

std::vector<const Vector*> grad_arrays(const SplitGrads& g) {
  std::vector<const Vector*> out;
  auto append = [&out](std::vector<const Vector*> arrays) {
    out.insert(out.end(), arrays.begin(), arrays.end());
  };
  append(param_arrays(g.edge));
  append(param_arrays(g.drone[0]));
  append(param_arrays(g.drone[1]));
  append(param_arrays(g.server_lstm[0]));
  append(param_arrays(g.server_lstm[1]));
  append(param_arrays(g.server_lstm[2]));
  append(param_arrays(g.server_fc));
  return out;
}

void add_lstm_grads(LstmLayerParams& into, const LstmLayerParams& from,
                    double scale) {
  auto dst = param_arrays(into);
  auto src = param_arrays(from);
  for (std::size_t a = 0; a < dst.size(); ++a) {
    Vector& d = *dst[a];
    const Vector& s = *src[a];
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += scale * s[k];
  }
}

}  // namespace

void accumulate(SplitGrads& into, const SplitGrads& from, double scale) {
  auto dst = grad_arrays(into);
  auto src = grad_arrays(from);
  contract(dst.size() == src.size(), "accumulate: gradient array counts disagree");
  for (std::size_t a = 0; a < dst.size(); ++a) {
    Vector& d = *dst[a];
    const Vector& s = *src[a];
    contract(d.size() == s.size(), "accumulate: gradient shapes disagree");
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += scale * s[k];
  }
}

void scale_grads(SplitGrads& grads, double scale) {
  for (Vector* arr : grad_arrays(grads)) {
    for (double& x : *arr) x *= scale;
  }
}

void backward_accumulate(const SplitNetwork& net, const ForwardRecord& rec,
                         double label, SplitGrads& out, double scale) {
  const std::size_t steps = net.dims.steps;
  const std::size_t hidden = net.dims.hidden;
  contract(rec.z_received.size() == steps,
           "backward: record does not match network step count");
  if (rec.path == Path::Direct) {
    contract(rec.mask_es.has_value(), "backward: Direct record lacks mask_es");
  } else {
    contract(rec.mask_ed.has_value() && rec.mask_ds.has_value(),
             "backward: Relay record lacks link masks");
  }

  const double dy_full = scale * 2.0 * (rec.y_full - label);
  const double dy_fc = scale * 2.0 * (rec.y_fc - label);

  // Full head: FC on the server stack's last hidden state.
  const Vector& top_last = rec.server_caches[2].steps.back().h;
  FcBackwardResult fc_full = fc_backward(net.server_fc, top_last, dy_full);
  add_in_place(out.server_fc.w.data(), fc_full.grads.w.data());
  add_in_place(out.server_fc.b, fc_full.grads.b);

  // Server stack BPTT, seeded at the last timestep only.
  Sequence dh = zeros_like_seq(steps, hidden);
  dh.back() = fc_full.dh;
  for (std::size_t l = 3; l-- > 0;) {
    LstmBackwardResult b = lstm_backward(net.server_lstm[l], rec.server_caches[l], dh);
    add_lstm_grads(out.server_lstm[l], b.grads, 1.0);
    dh = std::move(b.dx_seq);
  }
  // dh now holds the gradient w.r.t. z_received from the full branch.

  // Early exit head: FC on the last row of z_received.
  FcBackwardResult fc_exit = fc_backward(net.server_fc, rec.z_received.back(), dy_fc);
  add_in_place(out.server_fc.w.data(), fc_exit.grads.w.data());
  add_in_place(out.server_fc.b, fc_exit.grads.b);
  add_in_place(dh.back(), fc_exit.dh);

  if (rec.path == Path::Direct) {
    Sequence dz = mask_gradient(dh, *rec.mask_es);
    LstmBackwardResult be = lstm_backward(net.edge, rec.edge_caches, dz);
    add_lstm_grads(out.edge, be.grads, 1.0);
    return;
  }

  // Relay: back through the drone-server mask, the drone stack, then the
  // edge-drone mask.
  Sequence d_drone_out = mask_gradient(dh, *rec.mask_ds);
  Sequence d_seq = std::move(d_drone_out);
  for (std::size_t l = 2; l-- > 0;) {
    LstmBackwardResult b = lstm_backward(net.drone[l], rec.drone_caches[l], d_seq);
    add_lstm_grads(out.drone[l], b.grads, 1.0);
    d_seq = std::move(b.dx_seq);
  }
  Sequence dz = mask_gradient(d_seq, *rec.mask_ed);
  LstmBackwardResult be = lstm_backward(net.edge, rec.edge_caches, dz);
  add_lstm_grads(out.edge, be.grads, 1.0);
}

SplitGrads backward(const SplitNetwork& net, const ForwardRecord& rec,
                    double label) {
  SplitGrads g = zero_grads(net);
  backward_accumulate(net, rec, label, g, 1.0);
  return g;
}

const char* strategy_name(StrategyId s) {
  switch (s) {
    case StrategyId::DirectFull: return "direct_full";
    case StrategyId::DirectFC: return "direct_fc";
    case StrategyId::RelayFull: return "relay_full";
    case StrategyId::RelayFC: return "relay_fc";
  }
  return "unknown";
}

std::optional<StrategyId> strategy_from_name(const std::string& name) {
  for (StrategyId s : kAllStrategies) {
    if (name == strategy_name(s)) return s;
  }
  return std::nullopt;
}

CostModel cost_model(const NetworkDims& dims) {
  const std::uint64_t h = dims.hidden;
  const std::uint64_t t = dims.steps;
  auto lstm_macs = [&](std::uint64_t in) { return t * 4 * h * (in + h); };
  CostModel c;
  c.edge = lstm_macs(dims.input_width);
  c.drone = 2 * lstm_macs(h);
  c.server_lstm = 3 * lstm_macs(h);
  c.fc = h;
  contract(c.edge < c.drone && c.drone < c.server_lstm + c.fc,
           "cost_model: sub-network cost ordering violated");
  return c;
}

std::uint64_t strategy_cost(const CostModel& c, StrategyId s) {
  switch (s) {
    case StrategyId::DirectFull: return c.edge + c.server_lstm + c.fc;
    case StrategyId::DirectFC: return c.edge + c.fc;
    case StrategyId::RelayFull: return c.edge + c.drone + c.server_lstm + c.fc;
    case StrategyId::RelayFC: return c.edge + c.drone + c.fc;
  }
  return 0;
}

int cost_rank(const CostModel& c, StrategyId s) {
  std::array<std::pair<std::uint64_t, int>, 4> costs;
  for (int k = 0; k < 4; ++k) {
    costs[k] = {strategy_cost(c, kAllStrategies[k]), k};
  }
  std::sort(costs.begin(), costs.end());
  for (int rank = 0; rank < 4; ++rank) {
    if (kAllStrategies[costs[rank].second] == s) return rank;
  }
  return -1;
}

double predict(const SplitNetwork& net, StrategyId strategy, const Sequence& x,
               Rng& rng, const LinkProbs& probs) {
  const std::size_t t = net.dims.steps;
  const std::size_t m = net.dims.hidden;
  switch (strategy) {
    case StrategyId::DirectFull:
    case StrategyId::DirectFC: {
      if (!probs.edge_server) {
        throw ConfigError("predict: missing channel spec for link edge_server");
      }
      ErasureMask mask = sample_mask(rng, *probs.edge_server, t, m);
      ForwardRecord rec = forward_direct(net, x, mask);
      return strategy == StrategyId::DirectFull ? rec.y_full : rec.y_fc;
    }
    case StrategyId::RelayFull:
    case StrategyId::RelayFC: {
      if (!probs.edge_drone) {
        throw ConfigError("predict: missing channel spec for link edge_drone");
      }
      if (!probs.drone_server) {
        throw ConfigError("predict: missing channel spec for link drone_server");
      }
      ErasureMask mask_ed = sample_mask(rng, *probs.edge_drone, t, m);
      ErasureMask mask_ds = sample_mask(rng, *probs.drone_server, t, m);
      ForwardRecord rec = forward_relay(net, x, mask_ed, mask_ds);
      return strategy == StrategyId::RelayFull ? rec.y_full : rec.y_fc;
    }
  }
  throw ContractViolation("predict: unknown strategy");
}

}  // namespace splitsim
