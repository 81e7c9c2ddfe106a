// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "splitsim/numeric.hpp"

namespace splitsim {

/// A sequence of per-timestep vectors (inputs, hidden states, gradients).
using Sequence = std::vector<Vector>;

struct LayerDims {
  std::size_t input_width = 0;  // D_in
  std::size_t hidden = 0;       // H
};

// ---------------------------------------------------------------------------
// Parameter containers. All recurrent layers use the dual-bias convention of
// the plain RNN cell: preactivation = W_ih x + b_ih + W_hh h_prev + b_hh.
// ---------------------------------------------------------------------------

struct RnnLayerParams {
  Matrix w_ih;  // H x D_in
  Matrix w_hh;  // H x H
  Vector b_ih;  // H
  Vector b_hh;  // H
};

struct GateParams {
  Matrix w_ih;
  Matrix w_hh;
  Vector b_ih;
  Vector b_hh;
};

/// Gate order is fixed: input, forget, cell, output.
enum class Gate : std::size_t { Input = 0, Forget = 1, Cell = 2, Output = 3 };

struct LstmLayerParams {
  std::array<GateParams, 4> gates;

  GateParams& gate(Gate g) { return gates[static_cast<std::size_t>(g)]; }
  const GateParams& gate(Gate g) const { return gates[static_cast<std::size_t>(g)]; }

  std::size_t hidden() const { return gates[0].w_hh.rows(); }
  std::size_t input_width() const { return gates[0].w_ih.cols(); }
};

struct FcParams {
  Matrix w;  // 1 x H
  Vector b;  // length 1; the output is a single regression scalar
};

// ---------------------------------------------------------------------------
// Forward caches. Each step records every intermediate needed by the exact
// reverse pass; replaying a step through the forward equations reproduces
// the stored outputs bit for bit.
// ---------------------------------------------------------------------------

struct RnnStepCache {
  Vector x;
  Vector h_prev;
  Vector preact;  // W_ih x + b_ih + W_hh h_prev + b_hh
  Vector h;
};

struct RnnCaches {
  std::vector<RnnStepCache> steps;
};

struct LstmStepCache {
  Vector x;
  Vector h_prev;
  Vector c_prev;
  Vector pre_i, pre_f, pre_g, pre_o;  // gate preactivations
  Vector i, f, g, o;                  // gate activations
  Vector c;
  Vector tanh_c;
  Vector h;
};

struct LstmCaches {
  std::vector<LstmStepCache> steps;
};

// ---------------------------------------------------------------------------
// Initialization: every weight and bias i.i.d. uniform on [-1/sqrt(H), 1/sqrt(H)].
// Draw order is fixed (field order; LSTM gates in input/forget/cell/output
// order, each w_ih row-major, then w_hh, b_ih, b_hh) so a seed pins the bytes.
// ---------------------------------------------------------------------------

RnnLayerParams init_rnn_params(std::uint64_t seed, LayerDims dims);
LstmLayerParams init_lstm_params(std::uint64_t seed, LayerDims dims);
FcParams init_fc_params(std::uint64_t seed, std::size_t input_width);

// Zero-filled copies with matching shapes; gradient holders.
LstmLayerParams zero_like(const LstmLayerParams& p);
FcParams zero_like(const FcParams& p);

// ---------------------------------------------------------------------------
// Forward / backward passes.
// ---------------------------------------------------------------------------

/// Plain RNN cell: h_t = tanh(W_ih x_t + b_ih + W_hh h_{t-1} + b_hh).
std::pair<Sequence, RnnCaches> rnn_forward(const RnnLayerParams& p,
                                           const Sequence& x_seq,
                                           const Vector& h0);

/// Single LSTM step; exposed so tests can replay caches.
LstmStepCache lstm_step(const LstmLayerParams& p, const Vector& x,
                        const Vector& h_prev, const Vector& c_prev);

/// i = sigma(.), f = sigma(.), g = tanh(.), o = sigma(.);
/// c_t = f (*) c_{t-1} + i (*) g; h_t = o (*) tanh(c_t). No peepholes.
std::pair<Sequence, LstmCaches> lstm_forward(const LstmLayerParams& p,
                                             const Sequence& x_seq,
                                             const Vector& h0, const Vector& c0);

struct RnnBackwardResult {
  RnnLayerParams grads;
  Sequence dx_seq;
};

struct LstmBackwardResult {
  LstmLayerParams grads;
  Sequence dx_seq;
};

/// Exact reverse-mode gradients given the upstream gradient dh_seq[t] flowing
/// into each h_t. dx_seq carries the gradient w.r.t. each input vector.
RnnBackwardResult rnn_backward(const RnnLayerParams& p, const RnnCaches& caches,
                               const Sequence& dh_seq);
LstmBackwardResult lstm_backward(const LstmLayerParams& p,
                                 const LstmCaches& caches,
                                 const Sequence& dh_seq);

/// y = w . h + b.
double fc_forward(const FcParams& p, const Vector& h);

struct FcBackwardResult {
  FcParams grads;
  Vector dh;
};

/// dw = dy * h^T, db = dy, dh = dy * w.
FcBackwardResult fc_backward(const FcParams& p, const Vector& h, double dy);

// ---------------------------------------------------------------------------
// Adam. State mirrors a flat list of parameter arrays; each array keeps its
// own first/second moments, the step counter is shared.
// ---------------------------------------------------------------------------

struct AdamHyper {
  double alpha = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Vector> m;
  std::vector<Vector> v;
  std::uint64_t t = 0;
};

AdamState make_adam_state(const std::vector<const Vector*>& params);

/// Bias-corrected update: theta -= alpha * m_hat / (sqrt(v_hat) + eps).
void adam_step(const std::vector<Vector*>& params,
               const std::vector<const Vector*>& grads, AdamState& state,
               const AdamHyper& hyper);

// Flat parameter-array views in a stable order (gates x {w_ih, w_hh, b_ih,
// b_hh}; FC: w, b). Used by the optimizer and by checkpoint serialization.
std::vector<Vector*> param_arrays(RnnLayerParams& p);
std::vector<Vector*> param_arrays(LstmLayerParams& p);
std::vector<Vector*> param_arrays(FcParams& p);
std::vector<const Vector*> param_arrays(const RnnLayerParams& p);
std::vector<const Vector*> param_arrays(const LstmLayerParams& p);
std::vector<const Vector*> param_arrays(const FcParams& p);

}  // namespace splitsim
