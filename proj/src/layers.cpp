// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/layers.hpp"

#include <cmath>
#include <string>

#include "splitsim/error.hpp"
#include "splitsim/rng.hpp"

namespace splitsim {

namespace {

void fill_uniform(Rng& rng, double bound, Vector& out) {
  for (double& x : out) x = rng.uniform(-bound, bound);
}

// preact[i] = b_ih[i] + b_hh[i] + sum_j w_ih(i,j) x[j] + sum_j w_hh(i,j) h[j],
// written into a preallocated vector; this is the training hot path.
void gate_preact_into(const GateParams& g, const Vector& x, const Vector& h_prev,
                      Vector& preact) {
  const std::size_t hidden = g.w_hh.rows();
  const std::size_t width = g.w_ih.cols();
  preact.resize(hidden);
  const double* wi = g.w_ih.data().data();
  const double* wh = g.w_hh.data().data();
  for (std::size_t i = 0; i < hidden; ++i) {
    double acc = g.b_ih[i] + g.b_hh[i];
    const double* wi_row = wi + i * width;
    for (std::size_t j = 0; j < width; ++j) acc += wi_row[j] * x[j];
    const double* wh_row = wh + i * hidden;
    for (std::size_t j = 0; j < hidden; ++j) acc += wh_row[j] * h_prev[j];
    preact[i] = acc;
  }
}

}  // namespace

LstmLayerParams zero_like(const LstmLayerParams& p) {
  LstmLayerParams z;
  for (std::size_t k = 0; k < 4; ++k) {
    z.gates[k].w_ih = Matrix(p.gates[k].w_ih.rows(), p.gates[k].w_ih.cols());
    z.gates[k].w_hh = Matrix(p.gates[k].w_hh.rows(), p.gates[k].w_hh.cols());
    z.gates[k].b_ih = Vector(p.gates[k].b_ih.size(), 0.0);
    z.gates[k].b_hh = Vector(p.gates[k].b_hh.size(), 0.0);
  }
  return z;
}

FcParams zero_like(const FcParams& p) {
  FcParams z;
  z.w = Matrix(p.w.rows(), p.w.cols());
  z.b = Vector(p.b.size(), 0.0);
  return z;
}

RnnLayerParams init_rnn_params(std::uint64_t seed, LayerDims dims) {
  contract(dims.hidden > 0 && dims.input_width > 0, "init_rnn_params: dims must be positive");
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
  RnnLayerParams p;
  p.w_ih = Matrix(dims.hidden, dims.input_width);
  p.w_hh = Matrix(dims.hidden, dims.hidden);
  p.b_ih = Vector(dims.hidden, 0.0);
  p.b_hh = Vector(dims.hidden, 0.0);
  fill_uniform(rng, bound, p.w_ih.data());
  fill_uniform(rng, bound, p.w_hh.data());
  fill_uniform(rng, bound, p.b_ih);
  fill_uniform(rng, bound, p.b_hh);
  return p;
}

LstmLayerParams init_lstm_params(std::uint64_t seed, LayerDims dims) {
  contract(dims.hidden > 0 && dims.input_width > 0, "init_lstm_params: dims must be positive");
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
  LstmLayerParams p;
  for (auto& g : p.gates) {
    g.w_ih = Matrix(dims.hidden, dims.input_width);
    g.w_hh = Matrix(dims.hidden, dims.hidden);
    g.b_ih = Vector(dims.hidden, 0.0);
    g.b_hh = Vector(dims.hidden, 0.0);
    fill_uniform(rng, bound, g.w_ih.data());
    fill_uniform(rng, bound, g.w_hh.data());
    fill_uniform(rng, bound, g.b_ih);
    fill_uniform(rng, bound, g.b_hh);
  }
  return p;
}

FcParams init_fc_params(std::uint64_t seed, std::size_t input_width) {
  contract(input_width > 0, "init_fc_params: input width must be positive");
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_width));
  FcParams p;
  p.w = Matrix(1, input_width);
  p.b = Vector(1, 0.0);
  fill_uniform(rng, bound, p.w.data());
  fill_uniform(rng, bound, p.b);
  return p;
}

std::pair<Sequence, RnnCaches> rnn_forward(const RnnLayerParams& p,
                                           const Sequence& x_seq,
                                           const Vector& h0) {
  contract(h0.size() == p.w_hh.rows(),
           "rnn_forward: h0 length " + std::to_string(h0.size()) +
               " does not match hidden size " + std::to_string(p.w_hh.rows()));
  RnnCaches caches;
  caches.steps.reserve(x_seq.size());
  Sequence h_seq;
  h_seq.reserve(x_seq.size());
  Vector h = h0;
  for (const Vector& x : x_seq) {
    RnnStepCache step;
    step.x = x;
    step.h_prev = h;
    step.preact = matvec(p.w_ih, x);
    add_in_place(step.preact, p.b_ih);
    add_in_place(step.preact, matvec(p.w_hh, h));
    add_in_place(step.preact, p.b_hh);
    step.h = activation(ActivationKind::Tanh, step.preact);
    h = step.h;
    h_seq.push_back(step.h);
    caches.steps.push_back(std::move(step));
  }
  return {std::move(h_seq), std::move(caches)};
}

LstmStepCache lstm_step(const LstmLayerParams& p, const Vector& x,
                        const Vector& h_prev, const Vector& c_prev) {
  const std::size_t hidden = p.hidden();
  LstmStepCache s;
  s.x = x;
  s.h_prev = h_prev;
  s.c_prev = c_prev;
  gate_preact_into(p.gate(Gate::Input), x, h_prev, s.pre_i);
  gate_preact_into(p.gate(Gate::Forget), x, h_prev, s.pre_f);
  gate_preact_into(p.gate(Gate::Cell), x, h_prev, s.pre_g);
  gate_preact_into(p.gate(Gate::Output), x, h_prev, s.pre_o);
  s.i.resize(hidden);
  s.f.resize(hidden);
  s.g.resize(hidden);
  s.o.resize(hidden);
  s.c.resize(hidden);
  s.tanh_c.resize(hidden);
  s.h.resize(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    s.i[k] = sigmoid(s.pre_i[k]);
    s.f[k] = sigmoid(s.pre_f[k]);
    s.g[k] = std::tanh(s.pre_g[k]);
    s.o[k] = sigmoid(s.pre_o[k]);
    s.c[k] = s.f[k] * c_prev[k] + s.i[k] * s.g[k];
    s.tanh_c[k] = std::tanh(s.c[k]);
    s.h[k] = s.o[k] * s.tanh_c[k];
  }
  return s;
}

std::pair<Sequence, LstmCaches> lstm_forward(const LstmLayerParams& p,
                                             const Sequence& x_seq,
                                             const Vector& h0,
                                             const Vector& c0) {
  const std::size_t hidden = p.hidden();
  contract(h0.size() == hidden && c0.size() == hidden,
           "lstm_forward: initial state lengths " + std::to_string(h0.size()) +
               "/" + std::to_string(c0.size()) + " do not match hidden size " +
               std::to_string(hidden));
  LstmCaches caches;
  caches.steps.reserve(x_seq.size());
  Sequence h_seq;
  h_seq.reserve(x_seq.size());
  Vector h = h0;
  Vector c = c0;
  for (const Vector& x : x_seq) {
    contract(x.size() == p.input_width(),
             "lstm_forward: input width " + std::to_string(x.size()) +
                 " does not match layer width " + std::to_string(p.input_width()));
    LstmStepCache s = lstm_step(p, x, h, c);
    h = s.h;
    c = s.c;
    h_seq.push_back(s.h);
    caches.steps.push_back(std::move(s));
  }
  return {std::move(h_seq), std::move(caches)};
}

RnnBackwardResult rnn_backward(const RnnLayerParams& p, const RnnCaches& caches,
                               const Sequence& dh_seq) {
  contract(dh_seq.size() == caches.steps.size(),
           "rnn_backward: dh_seq length " + std::to_string(dh_seq.size()) +
               " vs cached steps " + std::to_string(caches.steps.size()));
  const std::size_t hidden = p.w_hh.rows();
  RnnBackwardResult r;
  r.grads.w_ih = Matrix(p.w_ih.rows(), p.w_ih.cols());
  r.grads.w_hh = Matrix(p.w_hh.rows(), p.w_hh.cols());
  r.grads.b_ih = Vector(hidden, 0.0);
  r.grads.b_hh = Vector(hidden, 0.0);
  r.dx_seq.assign(caches.steps.size(), Vector());

  Vector dh_rec(hidden, 0.0);
  for (std::size_t t = caches.steps.size(); t-- > 0;) {
    const RnnStepCache& s = caches.steps[t];
    Vector dh = elementwise(ElemOp::Add, dh_seq[t], dh_rec);
    // d tanh
    Vector da(hidden);
    for (std::size_t k = 0; k < hidden; ++k) da[k] = dh[k] * (1.0 - s.h[k] * s.h[k]);
    add_outer(r.grads.w_ih, da, s.x);
    add_outer(r.grads.w_hh, da, s.h_prev);
    add_in_place(r.grads.b_ih, da);
    add_in_place(r.grads.b_hh, da);
    r.dx_seq[t] = matvec_transposed(p.w_ih, da);
    dh_rec = matvec_transposed(p.w_hh, da);
  }
  return r;
}

LstmBackwardResult lstm_backward(const LstmLayerParams& p,
                                 const LstmCaches& caches,
                                 const Sequence& dh_seq) {
  contract(dh_seq.size() == caches.steps.size(),
           "lstm_backward: dh_seq length " + std::to_string(dh_seq.size()) +
               " vs cached steps " + std::to_string(caches.steps.size()));
  const std::size_t hidden = p.hidden();
  const std::size_t width = p.input_width();
  LstmBackwardResult r;
  r.grads = zero_like(p);
  r.dx_seq.assign(caches.steps.size(), Vector());

  Vector dh_rec(hidden, 0.0);
  Vector dc_rec(hidden, 0.0);
  Vector dc(hidden);
  std::array<Vector, 4> da;  // gate order: input, forget, cell, output
  for (auto& v : da) v.resize(hidden);
  Vector dh_next(hidden);

  for (std::size_t t = caches.steps.size(); t-- > 0;) {
    const LstmStepCache& s = caches.steps[t];
    for (std::size_t k = 0; k < hidden; ++k) {
      const double dh = dh_seq[t][k] + dh_rec[k];
      da[3][k] = dh * s.tanh_c[k] * s.o[k] * (1.0 - s.o[k]);
      dc[k] = dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_rec[k];
      da[1][k] = dc[k] * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
      da[0][k] = dc[k] * s.g[k] * s.i[k] * (1.0 - s.i[k]);
      da[2][k] = dc[k] * s.i[k] * (1.0 - s.g[k] * s.g[k]);
    }

    Vector& dx = r.dx_seq[t];
    dx.assign(width, 0.0);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    for (std::size_t g = 0; g < 4; ++g) {
      GateParams& gg = r.grads.gates[g];
      const GateParams& gp = p.gates[g];
      const double* wi = gp.w_ih.data().data();
      const double* wh = gp.w_hh.data().data();
      double* gwi = gg.w_ih.data().data();
      double* gwh = gg.w_hh.data().data();
      for (std::size_t i = 0; i < hidden; ++i) {
        const double a = da[g][i];
        gg.b_ih[i] += a;
        gg.b_hh[i] += a;
        const double* wi_row = wi + i * width;
        double* gwi_row = gwi + i * width;
        for (std::size_t j = 0; j < width; ++j) {
          gwi_row[j] += a * s.x[j];
          dx[j] += wi_row[j] * a;
        }
        const double* wh_row = wh + i * hidden;
        double* gwh_row = gwh + i * hidden;
        for (std::size_t j = 0; j < hidden; ++j) {
          gwh_row[j] += a * s.h_prev[j];
          dh_next[j] += wh_row[j] * a;
        }
      }
    }
    dh_rec = dh_next;
    for (std::size_t k = 0; k < hidden; ++k) dc_rec[k] = dc[k] * s.f[k];
  }
  return r;
}

double fc_forward(const FcParams& p, const Vector& h) {
  contract(h.size() == p.w.cols(),
           "fc_forward: input length " + std::to_string(h.size()) +
               " does not match weight width " + std::to_string(p.w.cols()));
  double acc = p.b[0];
  for (std::size_t j = 0; j < h.size(); ++j) acc += p.w(0, j) * h[j];
  return acc;
}

FcBackwardResult fc_backward(const FcParams& p, const Vector& h, double dy) {
  contract(h.size() == p.w.cols(),
           "fc_backward: input length " + std::to_string(h.size()) +
               " does not match weight width " + std::to_string(p.w.cols()));
  FcBackwardResult r;
  r.grads.w = Matrix(1, h.size());
  r.grads.b = Vector(1, dy);
  r.dh = Vector(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) {
    r.grads.w(0, j) = dy * h[j];
    r.dh[j] = dy * p.w(0, j);
  }
  return r;
}

AdamState make_adam_state(const std::vector<const Vector*>& params) {
  AdamState s;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Vector* p : params) {
    s.m.emplace_back(p->size(), 0.0);
    s.v.emplace_back(p->size(), 0.0);
  }
  return s;
}

void adam_step(const std::vector<Vector*>& params,
               const std::vector<const Vector*>& grads, AdamState& state,
               const AdamHyper& hyper) {
  contract(params.size() == grads.size() && params.size() == state.m.size() &&
               params.size() == state.v.size(),
           "adam_step: parameter/gradient/state array counts disagree");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
  for (std::size_t a = 0; a < params.size(); ++a) {
    Vector& theta = *params[a];
    const Vector& g = *grads[a];
    Vector& m = state.m[a];
    Vector& v = state.v[a];
    contract(theta.size() == g.size() && theta.size() == m.size(),
             "adam_step: shape mismatch in array " + std::to_string(a));
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g[k];
      v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      theta[k] -= hyper.alpha * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    }
  }
}

std::vector<Vector*> param_arrays(RnnLayerParams& p) {
  return {&p.w_ih.data(), &p.w_hh.data(), &p.b_ih, &p.b_hh};
}

std::vector<Vector*> param_arrays(LstmLayerParams& p) {
  std::vector<Vector*> out;
  out.reserve(16);
  for (auto& g : p.gates) {
    out.push_back(&g.w_ih.data());
    out.push_back(&g.w_hh.data());
    out.push_back(&g.b_ih);
    out.push_back(&g.b_hh);
  }
  return out;
}

std::vector<Vector*> param_arrays(FcParams& p) { return {&p.w.data(), &p.b}; }

std::vector<const Vector*> param_arrays(const RnnLayerParams& p) {
  return {&p.w_ih.data(), &p.w_hh.data(), &p.b_ih, &p.b_hh};
}

std::vector<const Vector*> param_arrays(const LstmLayerParams& p) {
  std::vector<const Vector*> out;
  out.reserve(16);
  for (const auto& g : p.gates) {
    out.push_back(&g.w_ih.data());
    out.push_back(&g.w_hh.data());
    out.push_back(&g.b_ih);
    out.push_back(&g.b_hh);
  }
  return out;
}

std::vector<const Vector*> param_arrays(const FcParams& p) {
  return {&p.w.data(), &p.b};
}

}  // namespace splitsim
