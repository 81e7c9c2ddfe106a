// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/orchestrator.hpp"

#include <cmath>

#include "doctest.h"
#include "splitsim/channel.hpp"
#include "splitsim/error.hpp"

using namespace splitsim;

namespace {

// Small learnable task: label is a fixed linear blend of the features.
std::vector<Sample> toy_samples(std::uint64_t seed, std::size_t n,
                                std::size_t width) {
  Rng rng(seed);
  std::vector<Sample> samples(n);
  for (Sample& s : samples) {
    s.features.resize(width);
    double acc = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      s.features[c] = rng.uniform(-1.0, 1.0);
      acc += (c % 2 == 0 ? 0.3 : -0.2) * s.features[c];
    }
    s.label = std::tanh(acc);
  }
  return samples;
}

SessionConfig tiny_config(std::uint64_t seed, std::size_t epochs) {
  SessionConfig config;
  config.seed = seed;
  config.epochs = epochs;
  config.batch_size = 16;
  config.hidden = 4;
  config.steps = 5;
  return config;
}

bool params_equal(const SplitNetwork& a, const SplitNetwork& b) {
  const auto va = named_params(a);
  const auto vb = named_params(b);
  if (va.size() != vb.size()) return false;
  for (std::size_t k = 0; k < va.size(); ++k) {
    if (*va[k].data != *vb[k].data) return false;
  }
  return true;
}

bool params_close(const SplitNetwork& a, const SplitNetwork& b, double tol) {
  const auto va = named_params(a);
  const auto vb = named_params(b);
  for (std::size_t k = 0; k < va.size(); ++k) {
    for (std::size_t i = 0; i < va[k].data->size(); ++i) {
      const double x = (*va[k].data)[i];
      const double y = (*vb[k].data)[i];
      if (std::abs(x - y) > tol * std::max({1.0, std::abs(x), std::abs(y)})) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

TEST_SUITE("orchestrator") {

TEST_CASE("config validation happens before any training") {
  const auto data = toy_samples(1, 8, 8);
  SessionConfig config = tiny_config(1, 1);

  SUBCASE("empty data") {
    CHECK_THROWS_AS(run_training_session(config, {}), ConfigError);
  }
  SUBCASE("bad batch size") {
    config.batch_size = 0;
    CHECK_THROWS_AS(run_training_session(config, data), ConfigError);
  }
  SUBCASE("bad probability") {
    config.p_ed = 1.5;
    CHECK_THROWS_AS(run_training_session(config, data), ConfigError);
  }
  SUBCASE("features narrower than the lookback") {
    config.steps = 10;
    CHECK_THROWS_AS(run_training_session(config, data), ConfigError);
  }
}

TEST_CASE("zero epochs return the initialization untouched") {
  const auto data = toy_samples(2, 10, 8);
  const SessionConfig config = tiny_config(3, 0);
  const SessionResult r1 = run_training_session(config, data);
  const SessionResult r2 = run_training_session(config, data);
  CHECK(r1.log.epoch_mean_loss.empty());
  CHECK(r1.messages.batches == 0);
  CHECK(r1.edge_adam.t == 0);
  CHECK(params_equal(r1.net, r2.net));

  // Untrained parameters still carry the init bound 1/sqrt(H).
  const double bound = 1.0 / std::sqrt(4.0);
  for (const auto& view : named_params(r1.net)) {
    for (double x : *view.data) {
      CHECK(std::abs(x) <= bound);
    }
  }
}

TEST_CASE("training reduces the loss on a learnable toy problem") {
  const auto data = toy_samples(5, 50, 8);
  SessionConfig config = tiny_config(7, 200);
  const SessionResult result = run_training_session(config, data);
  REQUIRE(result.log.epoch_mean_loss.size() == 200);
  CHECK(result.log.epoch_mean_loss.back() < result.log.epoch_mean_loss.front());
  CHECK(result.log.epoch_mean_loss.back() <
        0.5 * result.log.epoch_mean_loss.front());
  for (double loss : result.log.epoch_mean_loss) CHECK(std::isfinite(loss));
}

TEST_CASE("sessions are bitwise deterministic") {
  const auto data = toy_samples(8, 30, 8);
  SessionConfig config = tiny_config(9, 3);
  config.p_es = 0.1;
  config.p_ed = 0.5;
  config.p_ds = 0.05;
  const SessionResult r1 = run_training_session(config, data);
  const SessionResult r2 = run_training_session(config, data);
  CHECK(params_equal(r1.net, r2.net));
  CHECK(r1.log.epoch_mean_loss == r2.log.epoch_mean_loss);
  CHECK(r1.edge_adam.m == r2.edge_adam.m);
  CHECK(r1.server_adam.v == r2.server_adam.v);

  SessionConfig other = config;
  other.seed = 10;
  const SessionResult r3 = run_training_session(other, data);
  CHECK_FALSE(params_equal(r1.net, r3.net));
}

TEST_CASE("message conservation per batch") {
  const auto data = toy_samples(11, 10, 8);
  SessionConfig config = tiny_config(12, 2);
  config.batch_size = 4;  // 3 batches per epoch, 6 total
  const SessionResult result = run_training_session(config, data);
  CHECK(result.messages.batches == 6);
  CHECK(result.messages.edge_server.activations == 6);
  CHECK(result.messages.edge_server.gradients == 6);
  CHECK(result.messages.edge_drone.activations == 6);
  CHECK(result.messages.edge_drone.gradients == 6);
  CHECK(result.messages.drone_server.activations == 6);
  CHECK(result.messages.drone_server.gradients == 6);
}

TEST_CASE("one lossless batch matches the composite-graph reference") {
  // Single sample, single batch, p = 0 everywhere: the message-passing
  // update must equal the same math done with the composite forward /
  // backward ops plus three per-node Adam steps.
  const auto data = toy_samples(13, 1, 8);
  SessionConfig config = tiny_config(14, 1);
  config.batch_size = 1;

  SessionConfig init_only = config;
  init_only.epochs = 0;
  SplitNetwork reference = run_training_session(init_only, data).net;

  const Sequence x = sequence_from_sample(data[0].features, reference.dims);
  const ErasureMask ones =
      ErasureMask::all_ones(reference.dims.steps, reference.dims.hidden);
  const ForwardRecord rec_d = forward_direct(reference, x, ones);
  const ForwardRecord rec_r = forward_relay(reference, x, ones, ones);
  SplitGrads grads = zero_grads(reference);
  backward_accumulate(reference, rec_d, data[0].label, grads, 1.0);
  backward_accumulate(reference, rec_r, data[0].label, grads, 1.0);

  // Per-node Adam over the disjoint parameter sets.
  AdamState edge_state = make_adam_state(param_arrays(std::as_const(reference.edge)));
  adam_step(param_arrays(reference.edge),
            param_arrays(std::as_const(grads.edge)), edge_state, config.hyper);

  std::vector<Vector*> drone_params;
  std::vector<const Vector*> drone_grads;
  for (std::size_t l = 0; l < 2; ++l) {
    auto p = param_arrays(reference.drone[l]);
    auto g = param_arrays(std::as_const(grads.drone[l]));
    drone_params.insert(drone_params.end(), p.begin(), p.end());
    drone_grads.insert(drone_grads.end(), g.begin(), g.end());
  }
  AdamState drone_state = make_adam_state(drone_grads);
  adam_step(drone_params, drone_grads, drone_state, config.hyper);

  std::vector<Vector*> server_params;
  std::vector<const Vector*> server_grads;
  for (std::size_t l = 0; l < 3; ++l) {
    auto p = param_arrays(reference.server_lstm[l]);
    auto g = param_arrays(std::as_const(grads.server_lstm[l]));
    server_params.insert(server_params.end(), p.begin(), p.end());
    server_grads.insert(server_grads.end(), g.begin(), g.end());
  }
  auto pf = param_arrays(reference.server_fc);
  auto gf = param_arrays(std::as_const(grads.server_fc));
  server_params.insert(server_params.end(), pf.begin(), pf.end());
  server_grads.insert(server_grads.end(), gf.begin(), gf.end());
  AdamState server_state = make_adam_state(server_grads);
  adam_step(server_params, server_grads, server_state, config.hyper);

  const SessionResult session = run_training_session(config, data);
  CHECK(params_close(session.net, reference, 1e-9));
}

TEST_CASE("evaluate") {
  const auto data = toy_samples(15, 12, 8);
  SessionConfig config = tiny_config(16, 0);
  const SplitNetwork net = run_training_session(config, data).net;

  LinkProbs lossless;
  lossless.edge_server = 0.0;
  lossless.edge_drone = 0.0;
  lossless.drone_server = 0.0;

  SUBCASE("repeat count does not matter without channel noise") {
    const double a = evaluate(net, data, StrategyId::DirectFull, lossless, 1, 1);
    const double b = evaluate(net, data, StrategyId::DirectFull, lossless, 1, 100);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
  SUBCASE("fully erased links reduce DirectFC to the bias predictor") {
    LinkProbs dead;
    dead.edge_server = 1.0;
    dead.edge_drone = 1.0;
    dead.drone_server = 1.0;
    const double bias = net.server_fc.b[0];
    double expected = 0.0;
    for (const Sample& s : data) {
      expected += (s.label - bias) * (s.label - bias);
    }
    expected /= static_cast<double>(data.size());
    const double mse = evaluate(net, data, StrategyId::DirectFC, dead, 2, 3);
    CHECK(mse == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("perfect constant predictor has zero error") {
    LinkProbs dead;
    dead.edge_server = 1.0;
    dead.edge_drone = 1.0;
    dead.drone_server = 1.0;
    auto constant = data;
    for (Sample& s : constant) s.label = net.server_fc.b[0];
    CHECK(evaluate(net, constant, StrategyId::DirectFC, dead, 3, 2) == 0.0);
  }
  SUBCASE("deterministic given the seed") {
    LinkProbs noisy;
    noisy.edge_server = 0.4;
    noisy.edge_drone = 0.2;
    noisy.drone_server = 0.05;
    const double a = evaluate(net, data, StrategyId::RelayFull, noisy, 42, 5);
    const double b = evaluate(net, data, StrategyId::RelayFull, noisy, 42, 5);
    CHECK(a == b);
  }
}

TEST_CASE("select_from_mse tie-break contract") {
  NetworkDims dims;
  dims.steps = 20;
  dims.input_width = 8;
  dims.hidden = 10;
  const CostModel costs = cost_model(dims);

  // Order: DirectFull, DirectFC, RelayFull, RelayFC.
  SUBCASE("strict argmin outside the tolerance") {
    const std::array<double, 4> mse{0.05, 0.08, 0.04, 0.041};
    CHECK(select_from_mse(mse, costs, 1e-3) == StrategyId::RelayFull);
  }
  SUBCASE("cheaper strategy within the tolerance wins") {
    const std::array<double, 4> mse{0.05, 0.08, 0.04, 0.041};
    CHECK(select_from_mse(mse, costs, 0.002) == StrategyId::RelayFC);
  }
  SUBCASE("full tie goes to the cheapest strategy") {
    const std::array<double, 4> mse{0.03, 0.03, 0.03, 0.03};
    CHECK(select_from_mse(mse, costs, 1e-3) == StrategyId::DirectFC);
    CHECK(select_from_mse(mse, costs, 0.0) == StrategyId::DirectFC);
  }
  SUBCASE("argmin is invariant under positive rescaling") {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
      std::array<double, 4> mse;
      for (double& v : mse) v = rng.uniform(0.01, 0.5);
      const double tol = rng.uniform(0.0, 0.05);
      const StrategyId base = select_from_mse(mse, costs, tol);
      for (double k : {0.5, 2.0, 8.0, 1024.0}) {  // exact scalings
        std::array<double, 4> scaled = mse;
        for (double& v : scaled) v *= k;
        CHECK(select_from_mse(scaled, costs, tol * k) == base);
      }
    }
  }
}

TEST_CASE("select_strategy on a live network") {
  const auto data = toy_samples(23, 10, 8);
  SessionConfig config = tiny_config(24, 0);
  const SplitNetwork net = run_training_session(config, data).net;

  LinkProbs estimates;
  estimates.edge_server = 0.2;
  estimates.edge_drone = 0.1;
  estimates.drone_server = 0.05;

  CHECK_THROWS_AS(select_strategy(net, {}, estimates, 1e-3, 1), ConfigError);

  const SelectionReport report =
      select_strategy_report(net, data, estimates, 1e-3, 1);
  // The chosen strategy is the argmin (or a cheaper one within tolerance).
  const double min_mse = *std::min_element(report.mse.begin(), report.mse.end());
  const double chosen_mse = report.mse[static_cast<std::size_t>(report.chosen)];
  CHECK(chosen_mse <= min_mse + 1e-3);

  SUBCASE("tolerance large enough always picks the cheapest") {
    CHECK(select_strategy(net, data, estimates, 1e9, 1) == StrategyId::DirectFC);
  }
  SUBCASE("selection is deterministic") {
    CHECK(select_strategy(net, data, estimates, 1e-3, 5) ==
          select_strategy(net, data, estimates, 1e-3, 5));
  }
}

}  // TEST_SUITE
