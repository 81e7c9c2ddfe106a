// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "splitsim/dataset.hpp"
#include "splitsim/split_network.hpp"

namespace splitsim {

// ---------------------------------------------------------------------------
// Message-passing model: three node state machines (edge, drone, server)
// exchange activation/gradient batches over the channel links, one
// synchronous lock-step batch at a time (no modeled latency). Parameter
// ownership is disjoint: the edge owns f_E, the drone f_D, the server f_S
// and the FC head, each with its own Adam state.
// ---------------------------------------------------------------------------

enum class NodeId { Edge, Drone, Server };

enum class MessageKind { Activation, Gradient, Decision };

struct Message {
  MessageKind kind = MessageKind::Activation;
  Path path_tag = Path::Direct;
  NodeId from = NodeId::Edge;
  NodeId to = NodeId::Server;
  std::uint64_t batch_id = 0;
  std::vector<Sequence> payload;  // one (steps x hidden) array per sample
  StrategyId decision = StrategyId::DirectFC;  // Decision messages only
};

struct SessionConfig {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t batch_size = 64;
  // Training erasure probabilities, fixed for the whole session.
  double p_es = 0.0;
  double p_ed = 0.0;
  double p_ds = 0.0;
  AdamHyper hyper;
  std::size_t hidden = 10;
  std::size_t steps = 20;  // lookback window; edge input width follows from data
};

struct TrainingLog {
  std::vector<double> epoch_mean_loss;
};

struct LinkCounters {
  std::uint64_t activations = 0;
  std::uint64_t gradients = 0;
};

struct MessageStats {
  LinkCounters edge_server;
  LinkCounters edge_drone;
  LinkCounters drone_server;
  std::uint64_t batches = 0;
};

struct SessionResult {
  SplitNetwork net;
  TrainingLog log;
  MessageStats messages;
  AdamState edge_adam;
  AdamState drone_adam;
  AdamState server_adam;
};

/// Joint-graph training (both paths per batch, four MSE terms). Batches are
/// drawn in a seeded shuffled order each epoch; the last batch may be
/// smaller. Deterministic given the config.
SessionResult run_training_session(const SessionConfig& config,
                                   const std::vector<Sample>& train);

/// Mean squared error over (sample, repeat) pairs with fresh masks per pair,
/// on whatever scale the samples carry (normalized in the standard pipeline).
double evaluate(const SplitNetwork& net, const std::vector<Sample>& samples,
                StrategyId strategy, const LinkProbs& probs, std::uint64_t seed,
                std::size_t repeats = 20);

struct SelectionReport {
  std::array<double, 4> mse{};      // indexed by StrategyId order
  std::array<int, 4> cost_ranks{};  // ascending compute cost, 0 = cheapest
  double tolerance = 0.0;
  StrategyId chosen = StrategyId::DirectFC;
};

/// Pure tie-break core: the minimum-MSE strategy wins; any strategy whose
/// MSE lies strictly within `tolerance` of the minimum competes, and the
/// cheapest competitor (lowest cost rank) is chosen.
StrategyId select_from_mse(const std::array<double, 4>& mse,
                           const CostModel& costs, double tolerance);

/// Evaluates all four strategies on the probe set under the given channel
/// estimates (20 mask redraws per probe sample), then applies select_from_mse.
SelectionReport select_strategy_report(const SplitNetwork& net,
                                       const std::vector<Sample>& probe,
                                       const LinkProbs& estimates,
                                       double tolerance, std::uint64_t seed);

StrategyId select_strategy(const SplitNetwork& net,
                           const std::vector<Sample>& probe,
                           const LinkProbs& estimates, double tolerance,
                           std::uint64_t seed);

}  // namespace splitsim
