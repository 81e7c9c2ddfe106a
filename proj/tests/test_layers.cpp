// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/layers.hpp"

#include <cmath>

#include "doctest.h"
#include "finite_diff.hpp"
#include "splitsim/error.hpp"
#include "splitsim/rng.hpp"

using namespace splitsim;
using splitsim::testing::finite_diff;
using splitsim::testing::grads_close;

namespace {

Sequence random_sequence(Rng& rng, std::size_t steps, std::size_t width,
                         double scale = 1.0) {
  Sequence seq(steps, Vector(width));
  for (auto& v : seq) {
    for (double& x : v) x = rng.uniform(-scale, scale);
  }
  return seq;
}

LstmLayerParams zero_lstm(std::size_t input_width, std::size_t hidden) {
  LstmLayerParams p = init_lstm_params(0, {input_width, hidden});
  for (Vector* arr : param_arrays(p)) {
    for (double& x : *arr) x = 0.0;
  }
  return p;
}

double weighted_sum(const Sequence& h_seq, const Sequence& weights) {
  double acc = 0.0;
  for (std::size_t t = 0; t < h_seq.size(); ++t) acc += dot(h_seq[t], weights[t]);
  return acc;
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("init_params is deterministic and bounded") {
  const LayerDims dims{8, 10};
  const LstmLayerParams a = init_lstm_params(42, dims);
  const LstmLayerParams b = init_lstm_params(42, dims);
  const LstmLayerParams c = init_lstm_params(43, dims);

  const double bound = 1.0 / std::sqrt(10.0);
  bool any_diff = false;
  auto pa = param_arrays(a), pb = param_arrays(b), pc = param_arrays(c);
  for (std::size_t k = 0; k < pa.size(); ++k) {
    CHECK(*pa[k] == *pb[k]);  // same seed, same bytes
    if (*pa[k] != *pc[k]) any_diff = true;
    for (double x : *pa[k]) {
      CHECK(x >= -bound);
      CHECK(x <= bound);
    }
  }
  CHECK(any_diff);
}

TEST_CASE("rnn_forward matches the cell equation") {
  SUBCASE("all-zero parameters give zero hidden states") {
    RnnLayerParams p = init_rnn_params(1, {3, 2});
    for (Vector* arr : param_arrays(p)) {
      for (double& x : *arr) x = 0.0;
    }
    Rng rng(2);
    const Sequence x = random_sequence(rng, 4, 3);
    const auto [h, caches] = rnn_forward(p, x, Vector(2, 0.0));
    for (const Vector& ht : h) CHECK(ht == Vector(2, 0.0));
  }
  SUBCASE("scalar identity cell evaluates tanh(x)") {
    RnnLayerParams p;
    p.w_ih = Matrix::identity(1);
    p.w_hh = Matrix(1, 1);
    p.b_ih = Vector(1, 0.0);
    p.b_hh = Vector(1, 0.0);
    const auto [h, caches] = rnn_forward(p, {{0.5}}, Vector(1, 0.0));
    CHECK(h[0][0] == doctest::Approx(std::tanh(0.5)).epsilon(1e-14));
    CHECK(h[0][0] == doctest::Approx(0.4621).epsilon(1e-4));
  }
  SUBCASE("T=1 with zero h0 is a feed-forward tanh layer") {
    const RnnLayerParams p = init_rnn_params(5, {2, 3});
    Rng rng(6);
    const Sequence x = random_sequence(rng, 1, 2);
    const auto [h, caches] = rnn_forward(p, x, Vector(3, 0.0));
    Vector pre = matvec(p.w_ih, x[0]);
    add_in_place(pre, p.b_ih);
    add_in_place(pre, p.b_hh);
    CHECK(h[0] == activation(ActivationKind::Tanh, pre));
  }
}

TEST_CASE("lstm_forward closed-form points") {
  SUBCASE("zero parameters, zero state stay at zero") {
    const LstmLayerParams p = zero_lstm(2, 3);
    Rng rng(3);
    const Sequence x = random_sequence(rng, 5, 2);
    const auto [h, caches] = lstm_forward(p, x, Vector(3, 0.0), Vector(3, 0.0));
    for (const auto& step : caches.steps) {
      CHECK(step.i == Vector(3, 0.5));
      CHECK(step.f == Vector(3, 0.5));
      CHECK(step.g == Vector(3, 0.0));
      CHECK(step.c == Vector(3, 0.0));
      CHECK(step.h == Vector(3, 0.0));
    }
  }
  SUBCASE("zero parameters with c0 = 1 halve the cell state") {
    const LstmLayerParams p = zero_lstm(1, 1);
    const auto [h, caches] =
        lstm_forward(p, {{0.0}}, Vector(1, 0.0), Vector(1, 1.0));
    CHECK(caches.steps[0].c[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(h[0][0] == doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-14));
    CHECK(h[0][0] == doctest::Approx(0.2311).epsilon(1e-3));
  }
  SUBCASE("hidden states stay strictly inside (-1, 1)") {
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
      const LstmLayerParams p = init_lstm_params(100 + trial, {3, 4});
      const Sequence x = random_sequence(rng, 6, 3, 3.0);
      const auto [h, caches] = lstm_forward(p, x, Vector(4, 0.0), Vector(4, 0.0));
      for (const Vector& ht : h) {
        for (double v : ht) {
          CHECK(std::abs(v) < 1.0);
        }
      }
    }
  }
  SUBCASE("forward is deterministic") {
    const LstmLayerParams p = init_lstm_params(21, {2, 3});
    Rng rng(22);
    const Sequence x = random_sequence(rng, 4, 2);
    const auto [h1, c1] = lstm_forward(p, x, Vector(3, 0.0), Vector(3, 0.0));
    const auto [h2, c2] = lstm_forward(p, x, Vector(3, 0.0), Vector(3, 0.0));
    CHECK(h1 == h2);
  }
}

TEST_CASE("cache replay reproduces recorded outputs exactly") {
  const LstmLayerParams p = init_lstm_params(31, {3, 4});
  Rng rng(32);
  const Sequence x = random_sequence(rng, 5, 3);
  const auto [h, caches] = lstm_forward(p, x, Vector(4, 0.0), Vector(4, 0.0));
  for (const LstmStepCache& s : caches.steps) {
    const LstmStepCache replay = lstm_step(p, s.x, s.h_prev, s.c_prev);
    CHECK(replay.h == s.h);
    CHECK(replay.c == s.c);
    CHECK(replay.i == s.i);
    CHECK(replay.pre_o == s.pre_o);
  }
}

TEST_CASE("lstm_backward degenerate cases") {
  const LstmLayerParams p = init_lstm_params(41, {2, 3});
  Rng rng(42);
  const Sequence x = random_sequence(rng, 4, 2);
  const auto [h, caches] = lstm_forward(p, x, Vector(3, 0.0), Vector(3, 0.0));

  SUBCASE("zero upstream gradient zeroes everything") {
    const Sequence dh(4, Vector(3, 0.0));
    const LstmBackwardResult r = lstm_backward(p, caches, dh);
    for (const Vector* arr : param_arrays(r.grads)) {
      for (double g : *arr) CHECK(g == 0.0);
    }
    for (const Vector& dx : r.dx_seq) CHECK(dx == Vector(2, 0.0));
  }
  SUBCASE("doubling the seed doubles every gradient") {
    Sequence dh = random_sequence(rng, 4, 3);
    Sequence dh2 = dh;
    for (auto& v : dh2) {
      for (double& g : v) g *= 2.0;
    }
    const LstmBackwardResult r1 = lstm_backward(p, caches, dh);
    const LstmBackwardResult r2 = lstm_backward(p, caches, dh2);
    auto a1 = param_arrays(r1.grads), a2 = param_arrays(r2.grads);
    for (std::size_t k = 0; k < a1.size(); ++k) {
      for (std::size_t i = 0; i < a1[k]->size(); ++i) {
        CHECK((*a2[k])[i] == 2.0 * (*a1[k])[i]);
      }
    }
  }
  SUBCASE("a second backward on the same caches is identical") {
    const Sequence dh = random_sequence(rng, 4, 3);
    const LstmBackwardResult r1 = lstm_backward(p, caches, dh);
    const LstmBackwardResult r2 = lstm_backward(p, caches, dh);
    auto a1 = param_arrays(r1.grads), a2 = param_arrays(r2.grads);
    for (std::size_t k = 0; k < a1.size(); ++k) CHECK(*a1[k] == *a2[k]);
    CHECK(r1.dx_seq == r2.dx_seq);
  }
  SUBCASE("length mismatch is rejected") {
    CHECK_THROWS_AS(lstm_backward(p, caches, Sequence(3, Vector(3, 0.0))),
                    ContractViolation);
  }
}

TEST_CASE("lstm gradients match finite differences") {
  // Sum-of-outputs loss over >= 20 random shapes and seeds.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(900 + seed);
    const std::size_t steps = 1 + static_cast<std::size_t>(rng.uniform() * 5);
    const std::size_t hidden = 1 + static_cast<std::size_t>(rng.uniform() * 4);
    const std::size_t width = 1 + static_cast<std::size_t>(rng.uniform() * 4);
    LstmLayerParams p = init_lstm_params(seed, {width, hidden});
    Sequence x = random_sequence(rng, steps, width);
    const Sequence ones(steps, Vector(hidden, 1.0));

    auto loss = [&] {
      const auto [h, caches] = lstm_forward(p, x, Vector(hidden, 0.0), Vector(hidden, 0.0));
      return weighted_sum(h, ones);
    };

    const auto [h, caches] = lstm_forward(p, x, Vector(hidden, 0.0), Vector(hidden, 0.0));
    const LstmBackwardResult r = lstm_backward(p, caches, ones);

    auto params = param_arrays(p);
    auto grads = param_arrays(r.grads);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const Vector numeric = finite_diff(*params[k], loss);
      CHECK(grads_close(*grads[k], numeric));
    }
    for (std::size_t t = 0; t < steps; ++t) {
      const Vector numeric = finite_diff(x[t], loss);
      CHECK(grads_close(r.dx_seq[t], numeric));
    }
  }
}

TEST_CASE("rnn gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(700 + seed);
    const std::size_t steps = 1 + static_cast<std::size_t>(rng.uniform() * 5);
    const std::size_t hidden = 1 + static_cast<std::size_t>(rng.uniform() * 4);
    const std::size_t width = 1 + static_cast<std::size_t>(rng.uniform() * 4);
    RnnLayerParams p = init_rnn_params(seed, {width, hidden});
    Sequence x = random_sequence(rng, steps, width);
    const Sequence ones(steps, Vector(hidden, 1.0));

    auto loss = [&] {
      const auto [h, caches] = rnn_forward(p, x, Vector(hidden, 0.0));
      return weighted_sum(h, ones);
    };

    const auto [h, caches] = rnn_forward(p, x, Vector(hidden, 0.0));
    const RnnBackwardResult r = rnn_backward(p, caches, ones);

    auto params = param_arrays(p);
    auto grads = param_arrays(r.grads);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const Vector numeric = finite_diff(*params[k], loss);
      CHECK(grads_close(*grads[k], numeric));
    }
    for (std::size_t t = 0; t < steps; ++t) {
      const Vector numeric = finite_diff(x[t], loss);
      CHECK(grads_close(r.dx_seq[t], numeric));
    }
  }
}

TEST_CASE("fc forward/backward") {
  SUBCASE("coordinate projection") {
    FcParams p;
    p.w = Matrix(1, 3);
    p.w(0, 0) = 1.0;
    p.b = Vector(1, 0.0);
    CHECK(fc_forward(p, {3.0, -5.0, 2.0}) == 3.0);
  }
  SUBCASE("zero upstream gradient") {
    const FcParams p = init_fc_params(51, 4);
    const FcBackwardResult r = fc_backward(p, {1.0, 2.0, 3.0, 4.0}, 0.0);
    CHECK(r.grads.w.data() == Vector(4, 0.0));
    CHECK(r.grads.b == Vector(1, 0.0));
    CHECK(r.dh == Vector(4, 0.0));
  }
  SUBCASE("matches finite differences tightly") {
    FcParams p = init_fc_params(52, 5);
    Rng rng(53);
    Vector h(5);
    for (double& x : h) x = rng.uniform(-2.0, 2.0);
    const double dy = rng.uniform(-2.0, 2.0);

    auto loss = [&] { return dy * fc_forward(p, h); };
    const FcBackwardResult r = fc_backward(p, h, dy);
    CHECK(grads_close(r.grads.w.data(), finite_diff(p.w.data(), loss), 1e-6));
    CHECK(grads_close(r.grads.b, finite_diff(p.b, loss), 1e-6));
    CHECK(grads_close(r.dh, finite_diff(h, loss), 1e-6));
  }
  SUBCASE("dimension mismatch is rejected") {
    const FcParams p = init_fc_params(54, 3);
    CHECK_THROWS_AS(fc_forward(p, {1.0, 2.0}), ContractViolation);
  }
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradients leave parameters unchanged and bump t") {
    Vector theta{1.0, -2.0, 3.0};
    const Vector grad(3, 0.0);
    AdamState state = make_adam_state({&theta});
    adam_step({&theta}, {&grad}, state, {});
    CHECK(theta == Vector{1.0, -2.0, 3.0});
    CHECK(state.t == 1);
  }
  SUBCASE("first step closed form") {
    Vector theta{0.0};
    const Vector grad{0.5};
    AdamState state = make_adam_state({&theta});
    AdamHyper hyper;  // alpha 0.01, eps 1e-8
    adam_step({&theta}, {&grad}, state, hyper);
    const double expected = -0.01 * 0.5 / (0.5 + 1e-8);
    CHECK(theta[0] == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("arrays update independently") {
    Vector a{1.0}, b{1.0};
    const Vector ga{0.5}, gb{0.0};
    AdamState state = make_adam_state({&a, &b});
    adam_step({&a, &b}, {&ga, &gb}, state, {});
    CHECK(a[0] != 1.0);
    CHECK(b[0] == 1.0);
  }
  SUBCASE("shape mismatch is rejected") {
    Vector theta{0.0};
    const Vector grad{0.5, 0.5};
    AdamState state = make_adam_state({&theta});
    CHECK_THROWS_AS(adam_step({&theta}, {&grad}, state, {}), ContractViolation);
  }
}

}  // TEST_SUITE
