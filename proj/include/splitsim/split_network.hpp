// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "splitsim/channel.hpp"
#include "splitsim/layers.hpp"

namespace splitsim {

// ---------------------------------------------------------------------------
// Network shape. The stack is fixed at 1 edge LSTM, 2 drone LSTMs, 3 server
// LSTMs plus one FC head (7 layers total). The representation crossing each
// link is the full hidden sequence of the upstream stack: steps x hidden,
// with hidden == representation width (H == M).
// ---------------------------------------------------------------------------

struct NetworkDims {
  std::size_t feature_count = 27;  // N: flat sample width = steps + input_width - 1
  std::size_t input_width = 8;     // per-step width at the edge layer
  std::size_t hidden = 10;         // H == M
  std::size_t steps = 20;          // T

  static constexpr std::size_t layer_count = 7;  // 6 LSTM + 1 FC
};

struct SplitNetwork {
  NetworkDims dims;
  LstmLayerParams edge;                       // f_E: 1 layer, input_width -> H
  std::array<LstmLayerParams, 2> drone;       // f_D: H -> H -> H
  std::array<LstmLayerParams, 3> server_lstm; // f_S body: H -> H -> H -> H
  FcParams server_fc;                         // shared head; also the early exit
};

/// Deterministic initialization; per-layer seeds are mixed from `seed`.
SplitNetwork init_split_network(std::uint64_t seed, const NetworkDims& dims);

/// Stable views over every trainable array (name, declared shape, storage),
/// in a fixed order: edge, drone l0/l1, server l0..l2, FC. Used by the
/// optimizer wiring and checkpoint serialization.
template <typename VecPtr>
struct ParamViewT {
  std::string name;
  std::vector<std::size_t> shape;  // [rows, cols] for matrices, [len] for vectors
  VecPtr data;
};
using ParamView = ParamViewT<Vector*>;
using ConstParamView = ParamViewT<const Vector*>;

std::vector<ParamView> named_params(SplitNetwork& net);
std::vector<ConstParamView> named_params(const SplitNetwork& net);

/// Encode a flat feature vector into the edge input sequence: step t carries
/// [lag_t, covariates...] where the first `steps` features are the lagged
/// target values and the rest are the per-sample covariates, repeated at
/// every step.
Sequence sequence_from_sample(const Vector& features, const NetworkDims& dims);

// ---------------------------------------------------------------------------
// Forward paths.
// ---------------------------------------------------------------------------

enum class Path { Direct, Relay };

/// Everything one forward pass produced, sufficient to replay its exact
/// reverse pass: per-layer caches, link masks, and the representations at
/// every link crossing.
struct ForwardRecord {
  Path path = Path::Direct;

  std::optional<ErasureMask> mask_es;  // Direct
  std::optional<ErasureMask> mask_ed;  // Relay
  std::optional<ErasureMask> mask_ds;  // Relay

  LstmCaches edge_caches;
  std::array<LstmCaches, 2> drone_caches;    // Relay only
  std::array<LstmCaches, 3> server_caches;

  Sequence z;           // edge output, pre-channel
  Sequence drone_in;    // Relay: apply_mask(z, mask_ed)
  Sequence drone_out;   // Relay: f_D output, pre-channel
  Sequence z_received;  // z_hat at the server input

  double y_full = 0.0;  // FC(last hidden of the server stack)
  double y_fc = 0.0;    // FC(last row of z_hat) — the early exit
};

ForwardRecord forward_direct(const SplitNetwork& net, const Sequence& x,
                             const ErasureMask& mask_es);
ForwardRecord forward_relay(const SplitNetwork& net, const Sequence& x,
                            const ErasureMask& mask_ed,
                            const ErasureMask& mask_ds);

/// Joint loss of one sample: (y - y_full)^2 + (y - y_fc)^2.
double compute_loss(double label, const ForwardRecord& rec);

// ---------------------------------------------------------------------------
// Backward pass.
// ---------------------------------------------------------------------------

/// Gradient holder with the same shapes as the parameters.
struct SplitGrads {
  LstmLayerParams edge;
  std::array<LstmLayerParams, 2> drone;
  std::array<LstmLayerParams, 3> server_lstm;
  FcParams server_fc;
};

SplitGrads zero_grads(const SplitNetwork& net);
void accumulate(SplitGrads& into, const SplitGrads& from, double scale = 1.0);
void scale_grads(SplitGrads& grads, double scale);

/// Exact reverse pass of compute_loss through the recorded path; link masks
/// gate the gradients exactly as they gated the activations. `scale`
/// multiplies the loss (used for batch averaging). Gradients accumulate
/// into `out`. On the Direct path the drone arrays receive nothing.
void backward_accumulate(const SplitNetwork& net, const ForwardRecord& rec,
                         double label, SplitGrads& out, double scale = 1.0);
SplitGrads backward(const SplitNetwork& net, const ForwardRecord& rec, double label);

// ---------------------------------------------------------------------------
// Inference strategies and their compute cost.
// ---------------------------------------------------------------------------

enum class StrategyId { DirectFull = 0, DirectFC = 1, RelayFull = 2, RelayFC = 3 };

constexpr std::array<StrategyId, 4> kAllStrategies = {
    StrategyId::DirectFull, StrategyId::DirectFC, StrategyId::RelayFull,
    StrategyId::RelayFC};

const char* strategy_name(StrategyId s);
std::optional<StrategyId> strategy_from_name(const std::string& name);

/// Multiply-accumulate counts of one forward pass through each sub-network.
/// C(f_S) = server_lstm + fc; the invariant C(f_E) < C(f_D) < C(f_S) holds
/// for the 1/2/3+FC split whenever input_width < 3 * hidden.
struct CostModel {
  std::uint64_t edge = 0;
  std::uint64_t drone = 0;
  std::uint64_t server_lstm = 0;
  std::uint64_t fc = 0;
};

CostModel cost_model(const NetworkDims& dims);
std::uint64_t strategy_cost(const CostModel& c, StrategyId s);

/// Rank in ascending strategy cost, 0 = cheapest. Ties break on enum order.
int cost_rank(const CostModel& c, StrategyId s);

struct LinkProbs {
  std::optional<double> edge_server;
  std::optional<double> edge_drone;
  std::optional<double> drone_server;
};

/// Fresh masks are drawn from `rng` for every link the strategy uses; returns
/// y_full for *Full strategies and y_fc for *FC strategies.
double predict(const SplitNetwork& net, StrategyId strategy, const Sequence& x,
               Rng& rng, const LinkProbs& probs);

}  // namespace splitsim
