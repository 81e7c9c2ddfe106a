// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/split_network.hpp"

#include <cmath>
#include <set>

#include "doctest.h"
#include "finite_diff.hpp"
#include "splitsim/error.hpp"

using namespace splitsim;
using splitsim::testing::finite_diff;
using splitsim::testing::grads_close;

namespace {

NetworkDims small_dims() {
  NetworkDims dims;
  dims.steps = 4;
  dims.input_width = 2;
  dims.hidden = 3;
  dims.feature_count = 5;
  return dims;
}

Sequence random_input(Rng& rng, const NetworkDims& dims) {
  Sequence x(dims.steps, Vector(dims.input_width));
  for (auto& row : x) {
    for (double& v : row) v = rng.uniform(-1.0, 1.0);
  }
  return x;
}

// Independent oracle: the same parameters evaluated as one monolithic
// 6-LSTM + FC stack, no channel code anywhere on the path.
double monolithic_full(const SplitNetwork& net, const Sequence& x) {
  const Vector zeros(net.dims.hidden, 0.0);
  Sequence h = x;
  const LstmLayerParams* layers[6] = {&net.edge,           &net.drone[0],
                                      &net.drone[1],       &net.server_lstm[0],
                                      &net.server_lstm[1], &net.server_lstm[2]};
  for (const LstmLayerParams* layer : layers) {
    auto [out, caches] = lstm_forward(*layer, h, zeros, zeros);
    h = std::move(out);
  }
  return fc_forward(net.server_fc, h.back());
}

}  // namespace

TEST_SUITE("split_network") {

TEST_CASE("sequence_from_sample layout") {
  NetworkDims dims = small_dims();  // 4 lags + 1 covariate = 5 features
  const Vector features{10, 11, 12, 13, 99};
  const Sequence seq = sequence_from_sample(features, dims);
  REQUIRE(seq.size() == 4);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(seq[t][0] == features[t]);
    CHECK(seq[t][1] == 99);
  }
  CHECK_THROWS_AS(sequence_from_sample({1, 2, 3}, dims), ContractViolation);
}

TEST_CASE("named_params covers the whole stack with unique names") {
  SplitNetwork net = init_split_network(5, small_dims());
  const auto views = named_params(net);
  CHECK(views.size() == 98);  // 6 LSTM layers x 16 arrays + FC w/b
  std::set<std::string> names;
  for (const auto& v : views) names.insert(v.name);
  CHECK(names.size() == views.size());
}

TEST_CASE("forward_direct against the lossless composition oracle") {
  const NetworkDims dims = small_dims();
  SplitNetwork net = init_split_network(7, dims);
  Rng rng(8);
  const Sequence x = random_input(rng, dims);
  const ErasureMask ones = ErasureMask::all_ones(dims.steps, dims.hidden);

  const ForwardRecord rec = forward_direct(net, x, ones);

  // Direct path skips the drone: edge then server stack then FC.
  const Vector zeros(dims.hidden, 0.0);
  auto [z, zc] = lstm_forward(net.edge, x, zeros, zeros);
  Sequence h = z;
  for (const auto& layer : net.server_lstm) {
    auto [out, c] = lstm_forward(layer, h, zeros, zeros);
    h = std::move(out);
  }
  CHECK(rec.y_full == doctest::Approx(fc_forward(net.server_fc, h.back())).epsilon(1e-15));
  CHECK(rec.y_fc == doctest::Approx(fc_forward(net.server_fc, z.back())).epsilon(1e-15));
  CHECK(rec.z_received == rec.z);
}

TEST_CASE("forward_direct with a fully erased link") {
  const NetworkDims dims = small_dims();
  SplitNetwork net = init_split_network(9, dims);
  Rng rng(10);
  const Sequence x = random_input(rng, dims);
  const ErasureMask none = ErasureMask::all_zeros(dims.steps, dims.hidden);

  const ForwardRecord rec = forward_direct(net, x, none);
  CHECK(rec.y_fc == net.server_fc.b[0]);  // FC of the zero vector

  const Vector zeros(dims.hidden, 0.0);
  Sequence h(dims.steps, Vector(dims.hidden, 0.0));
  for (const auto& layer : net.server_lstm) {
    auto [out, c] = lstm_forward(layer, h, zeros, zeros);
    h = std::move(out);
  }
  CHECK(rec.y_full == doctest::Approx(fc_forward(net.server_fc, h.back())).epsilon(1e-15));
}

TEST_CASE("forward_relay equals the monolithic network on clean links") {
  const NetworkDims dims = small_dims();
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    SplitNetwork net = init_split_network(100 + trial, dims);
    const Sequence x = random_input(rng, dims);
    const ErasureMask ones = ErasureMask::all_ones(dims.steps, dims.hidden);
    const ForwardRecord rec = forward_relay(net, x, ones, ones);
    CHECK(std::abs(rec.y_full - monolithic_full(net, x)) < 1e-12);
  }
}

TEST_CASE("forward_relay with an erased edge-drone link ignores the input") {
  const NetworkDims dims = small_dims();
  SplitNetwork net = init_split_network(13, dims);
  Rng rng(14);
  const Sequence x1 = random_input(rng, dims);
  const Sequence x2 = random_input(rng, dims);
  const ErasureMask none = ErasureMask::all_zeros(dims.steps, dims.hidden);
  const ErasureMask ones = ErasureMask::all_ones(dims.steps, dims.hidden);

  const ForwardRecord r1 = forward_relay(net, x1, none, ones);
  const ForwardRecord r2 = forward_relay(net, x2, none, ones);
  CHECK(r1.y_full == r2.y_full);
  CHECK(r1.y_fc == r2.y_fc);
}

TEST_CASE("mask shape mismatches are rejected") {
  const NetworkDims dims = small_dims();
  SplitNetwork net = init_split_network(15, dims);
  Rng rng(16);
  const Sequence x = random_input(rng, dims);
  const ErasureMask bad = ErasureMask::all_ones(dims.steps, dims.hidden + 1);
  const ErasureMask ok = ErasureMask::all_ones(dims.steps, dims.hidden);
  CHECK_THROWS_AS(forward_direct(net, x, bad), ContractViolation);
  CHECK_THROWS_AS(forward_relay(net, x, ok, bad), ContractViolation);
}

TEST_CASE("compute_loss is the two-term squared error") {
  ForwardRecord rec;
  rec.y_full = 0.1;
  rec.y_fc = 0.3;
  CHECK(compute_loss(0.0, rec) == doctest::Approx(0.10).epsilon(1e-15));

  rec.y_full = rec.y_fc = 0.7;
  CHECK(compute_loss(0.7, rec) == 0.0);

  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    rec.y_full = rng.uniform(-1.0, 1.0);
    rec.y_fc = rng.uniform(-1.0, 1.0);
    const double y = rng.uniform(-1.0, 1.0);
    const double mse_full = (y - rec.y_full) * (y - rec.y_full);
    const double mse_fc = (y - rec.y_fc) * (y - rec.y_fc);
    const double loss = compute_loss(y, rec);
    CHECK(loss == doctest::Approx(mse_full + mse_fc).epsilon(1e-14));
    CHECK(loss >= std::max(mse_full, mse_fc));
  }
}

TEST_CASE("record replay reproduces the recorded outputs") {
  const NetworkDims dims = small_dims();
  SplitNetwork net = init_split_network(18, dims);
  Rng rng(19);
  const Sequence x = random_input(rng, dims);
  const ErasureMask ed = sample_mask(rng, 0.4, dims.steps, dims.hidden);
  const ErasureMask ds = sample_mask(rng, 0.1, dims.steps, dims.hidden);
  const ForwardRecord rec = forward_relay(net, x, ed, ds);
  CHECK(fc_forward(net.server_fc, rec.server_caches[2].steps.back().h) == rec.y_full);
  CHECK(fc_forward(net.server_fc, rec.z_received.back()) == rec.y_fc);
}

TEST_CASE("backward matches finite differences with frozen masks") {
  const NetworkDims dims = small_dims();
  Rng rng(20);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SplitNetwork net = init_split_network(200 + seed, dims);
    Sequence x = random_input(rng, dims);
    const double label = rng.uniform(-1.0, 1.0);
    const ErasureMask mask_es = sample_mask(rng, 0.3, dims.steps, dims.hidden);
    const ErasureMask mask_ed = sample_mask(rng, 0.4, dims.steps, dims.hidden);
    const ErasureMask mask_ds = sample_mask(rng, 0.1, dims.steps, dims.hidden);

    for (Path path : {Path::Direct, Path::Relay}) {
      auto loss = [&] {
        const ForwardRecord rec = path == Path::Direct
                                      ? forward_direct(net, x, mask_es)
                                      : forward_relay(net, x, mask_ed, mask_ds);
        return compute_loss(label, rec);
      };
      const ForwardRecord rec = path == Path::Direct
                                    ? forward_direct(net, x, mask_es)
                                    : forward_relay(net, x, mask_ed, mask_ds);
      SplitGrads grads = backward(net, rec, label);

      auto views = named_params(net);
      std::vector<Vector*> gvecs;
      for (auto* layer : {&grads.edge, &grads.drone[0], &grads.drone[1],
                          &grads.server_lstm[0], &grads.server_lstm[1],
                          &grads.server_lstm[2]}) {
        auto arrays = param_arrays(*layer);
        gvecs.insert(gvecs.end(), arrays.begin(), arrays.end());
      }
      auto fca = param_arrays(grads.server_fc);
      gvecs.insert(gvecs.end(), fca.begin(), fca.end());

      REQUIRE(views.size() == gvecs.size());
      for (std::size_t k = 0; k < views.size(); ++k) {
        const Vector numeric = finite_diff(*views[k].data, loss);
        CHECK(grads_close(*gvecs[k], numeric));
      }
    }
  }
}

TEST_CASE("direct path leaves drone gradients at zero") {
  const NetworkDims dims = small_dims();
  SplitNetwork net = init_split_network(21, dims);
  Rng rng(22);
  const Sequence x = random_input(rng, dims);
  const ErasureMask mask = sample_mask(rng, 0.3, dims.steps, dims.hidden);
  const ForwardRecord rec = forward_direct(net, x, mask);
  const SplitGrads grads = backward(net, rec, 0.5);
  for (const auto& layer : grads.drone) {
    for (const Vector* arr : param_arrays(layer)) {
      for (double g : *arr) CHECK(g == 0.0);
    }
  }
}

TEST_CASE("fully erased edge-drone link blocks all edge gradients") {
  const NetworkDims dims = small_dims();
  SplitNetwork net = init_split_network(23, dims);
  Rng rng(24);
  const Sequence x = random_input(rng, dims);
  const ErasureMask none = ErasureMask::all_zeros(dims.steps, dims.hidden);
  const ErasureMask ds = sample_mask(rng, 0.2, dims.steps, dims.hidden);
  const ForwardRecord rec = forward_relay(net, x, none, ds);
  const SplitGrads grads = backward(net, rec, 0.5);
  for (const Vector* arr : param_arrays(grads.edge)) {
    for (double g : *arr) CHECK(g == 0.0);
  }
}

TEST_CASE("erased coordinates block per-coordinate gradient flow") {
  const NetworkDims dims = small_dims();
  SplitNetwork net = init_split_network(25, dims);
  Rng rng(26);
  const Sequence x = random_input(rng, dims);
  const ErasureMask mask = sample_mask(rng, 0.5, dims.steps, dims.hidden);
  const ForwardRecord rec = forward_direct(net, x, mask);

  // Gradient arriving upstream of the link: recompute the server-side dz and
  // gate it; erased coordinates must be exactly zero.
  const SplitGrads grads = backward(net, rec, 0.25);
  (void)grads;
  const double dy_full = 2.0 * (rec.y_full - 0.25);
  const double dy_fc = 2.0 * (rec.y_fc - 0.25);
  FcBackwardResult fc_full =
      fc_backward(net.server_fc, rec.server_caches[2].steps.back().h, dy_full);
  Sequence dh(dims.steps, Vector(dims.hidden, 0.0));
  dh.back() = fc_full.dh;
  for (std::size_t l = 3; l-- > 0;) {
    LstmBackwardResult b = lstm_backward(net.server_lstm[l], rec.server_caches[l], dh);
    dh = std::move(b.dx_seq);
  }
  FcBackwardResult fc_exit = fc_backward(net.server_fc, rec.z_received.back(), dy_fc);
  add_in_place(dh.back(), fc_exit.dh);
  const Sequence dz = mask_gradient(dh, mask);
  for (std::size_t t = 0; t < dims.steps; ++t) {
    for (std::size_t m = 0; m < dims.hidden; ++m) {
      if (mask(t, m) == 0) CHECK(dz[t][m] == 0.0);
    }
  }
}

TEST_CASE("cost model ordering and strategy ranks") {
  NetworkDims dims;  // paper configuration
  dims.steps = 20;
  dims.input_width = 8;
  dims.hidden = 10;
  const CostModel c = cost_model(dims);
  CHECK(c.edge < c.drone);
  CHECK(c.drone < c.server_lstm + c.fc);
  CHECK(c.edge == 14400);
  CHECK(c.drone == 32000);
  CHECK(c.server_lstm == 48000);

  CHECK(cost_rank(c, StrategyId::DirectFC) == 0);
  CHECK(cost_rank(c, StrategyId::RelayFC) == 1);
  CHECK(cost_rank(c, StrategyId::DirectFull) == 2);
  CHECK(cost_rank(c, StrategyId::RelayFull) == 3);
  CHECK(strategy_cost(c, StrategyId::DirectFC) < strategy_cost(c, StrategyId::DirectFull));
  CHECK(strategy_cost(c, StrategyId::RelayFC) < strategy_cost(c, StrategyId::RelayFull));
}

TEST_CASE("predict routes strategies over the right links") {
  const NetworkDims dims = small_dims();
  SplitNetwork net = init_split_network(27, dims);
  Rng rng(28);
  const Sequence x = random_input(rng, dims);

  LinkProbs lossless;
  lossless.edge_server = 0.0;
  lossless.edge_drone = 0.0;
  lossless.drone_server = 0.0;

  SUBCASE("lossless DirectFull equals the direct composition") {
    Rng r1(5);
    const double y = predict(net, StrategyId::DirectFull, x, r1, lossless);
    const ErasureMask ones = ErasureMask::all_ones(dims.steps, dims.hidden);
    CHECK(y == forward_direct(net, x, ones).y_full);
  }
  SUBCASE("lossless RelayFC reads the last drone output row") {
    Rng r1(6);
    const double y = predict(net, StrategyId::RelayFC, x, r1, lossless);
    const ErasureMask ones = ErasureMask::all_ones(dims.steps, dims.hidden);
    const ForwardRecord rec = forward_relay(net, x, ones, ones);
    CHECK(y == fc_forward(net.server_fc, rec.drone_out.back()));
  }
  SUBCASE("same seed, same prediction") {
    LinkProbs noisy;
    noisy.edge_server = 0.4;
    noisy.edge_drone = 0.2;
    noisy.drone_server = 0.1;
    Rng r1(7), r2(7);
    CHECK(predict(net, StrategyId::RelayFull, x, r1, noisy) ==
          predict(net, StrategyId::RelayFull, x, r2, noisy));
  }
  SUBCASE("missing channel specs are configuration errors") {
    LinkProbs only_direct;
    only_direct.edge_server = 0.1;
    Rng r1(8);
    CHECK_NOTHROW(predict(net, StrategyId::DirectFC, x, r1, only_direct));
    CHECK_THROWS_AS(predict(net, StrategyId::RelayFull, x, r1, only_direct),
                    ConfigError);
  }
}

}  // TEST_SUITE
