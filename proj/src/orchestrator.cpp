// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/orchestrator.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>

#include "splitsim/channel.hpp"
#include "splitsim/error.hpp"
#include "splitsim/rng.hpp"

namespace splitsim {

namespace {

using SendFn = std::function<void(Message)>;

Sequence zero_seq(std::size_t steps, std::size_t width) {
  return Sequence(steps, Vector(width, 0.0));
}

// One wireless link. Activations crossing it draw a fresh mask per sample;
// the gradient of the same batch is gated by exactly those masks (the
// Jacobian of z_hat = z (*) q), never by a second random draw.
class LinkChannel {
 public:
  LinkChannel(Link link, double erasure_prob, std::uint64_t seed)
      : spec_{link, erasure_prob}, rng_(seed) {}

  void traverse(Message& msg) {
    if (msg.kind == MessageKind::Activation) {
      forward_masks_.clear();
      batch_id_ = msg.batch_id;
      for (Sequence& z : msg.payload) {
        ErasureMask mask = sample_mask(rng_, spec_.erasure_prob, z.size(),
                                       z.empty() ? 0 : z[0].size());
        forward_masks_.push_back(mask);
        z = apply_mask(z, mask);
      }
      ++counters.activations;
    } else if (msg.kind == MessageKind::Gradient) {
      contract(msg.batch_id == batch_id_ &&
                   msg.payload.size() == forward_masks_.size(),
               std::string("link ") + link_name(spec_.link) +
                   ": gradient does not match the forward batch");
      for (std::size_t i = 0; i < msg.payload.size(); ++i) {
        msg.payload[i] = mask_gradient(msg.payload[i], forward_masks_[i]);
      }
      ++counters.gradients;
    }
  }

  LinkCounters counters;

 private:
  ChannelSpec spec_;
  Rng rng_;
  std::uint64_t batch_id_ = 0;
  std::vector<ErasureMask> forward_masks_;
};

// f_E owner. Runs the shared edge forward once per sample, fans the
// representation out to both paths, and closes the batch when the gradients
// from both paths have come back.
class EdgeNode {
 public:
  EdgeNode(LstmLayerParams params, const AdamHyper& hyper, NetworkDims dims)
      : params_(std::move(params)), hyper_(hyper), dims_(dims) {
    adam_ = make_adam_state(param_arrays(std::as_const(params_)));
  }

  void start_batch(const std::vector<const Sample*>& batch,
                   std::uint64_t batch_id, const SendFn& send) {
    caches_.clear();
    caches_.reserve(batch.size());
    d_direct_.reset();
    d_relay_.reset();
    const Vector zeros(dims_.hidden, 0.0);
    std::vector<Sequence> z_batch;
    z_batch.reserve(batch.size());
    for (const Sample* s : batch) {
      Sequence x = sequence_from_sample(s->features, dims_);
      auto [z, cache] = lstm_forward(params_, x, zeros, zeros);
      caches_.push_back(std::move(cache));
      z_batch.push_back(std::move(z));
    }
    send({MessageKind::Activation, Path::Direct, NodeId::Edge, NodeId::Server,
          batch_id, z_batch, StrategyId::DirectFC});
    send({MessageKind::Activation, Path::Relay, NodeId::Edge, NodeId::Drone,
          batch_id, std::move(z_batch), StrategyId::DirectFC});
  }

  void on_gradient(Message msg) {
    if (msg.path_tag == Path::Direct) {
      d_direct_ = std::move(msg.payload);
    } else {
      d_relay_ = std::move(msg.payload);
    }
    if (!d_direct_ || !d_relay_) return;

    contract(d_direct_->size() == caches_.size() &&
                 d_relay_->size() == caches_.size(),
             "edge: gradient batch size does not match forward batch");
    LstmLayerParams grads = zero_like(params_);
    auto grad_refs = param_arrays(std::as_const(grads));
    for (std::size_t i = 0; i < caches_.size(); ++i) {
      Sequence dz = (*d_direct_)[i];
      for (std::size_t t = 0; t < dz.size(); ++t) {
        add_in_place(dz[t], (*d_relay_)[i][t]);
      }
      LstmBackwardResult b = lstm_backward(params_, caches_[i], dz);
      auto src = param_arrays(std::as_const(b.grads));
      auto dst = param_arrays(grads);
      for (std::size_t a = 0; a < dst.size(); ++a) add_in_place(*dst[a], *src[a]);
    }
    adam_step(param_arrays(params_), grad_refs, adam_, hyper_);
    d_direct_.reset();
    d_relay_.reset();
  }

  const LstmLayerParams& params() const { return params_; }
  const AdamState& adam() const { return adam_; }

 private:
  LstmLayerParams params_;
  AdamHyper hyper_;
  NetworkDims dims_;
  AdamState adam_;
  std::vector<LstmCaches> caches_;
  std::optional<std::vector<Sequence>> d_direct_;
  std::optional<std::vector<Sequence>> d_relay_;
};

// f_D owner: two stacked LSTM layers on the relay path.
class DroneNode {
 public:
  DroneNode(std::array<LstmLayerParams, 2> params, const AdamHyper& hyper,
            std::size_t hidden)
      : params_(std::move(params)), hyper_(hyper), hidden_(hidden) {
    std::vector<const Vector*> refs;
    for (const auto& layer : params_) {
      auto arrays = param_arrays(layer);
      refs.insert(refs.end(), arrays.begin(), arrays.end());
    }
    adam_ = make_adam_state(refs);
  }

  void on_activation(Message msg, const SendFn& send) {
    const Vector zeros(hidden_, 0.0);
    caches_[0].clear();
    caches_[1].clear();
    std::vector<Sequence> out_batch;
    out_batch.reserve(msg.payload.size());
    for (Sequence& in : msg.payload) {
      Sequence h = std::move(in);
      for (std::size_t l = 0; l < 2; ++l) {
        auto [out, cache] = lstm_forward(params_[l], h, zeros, zeros);
        caches_[l].push_back(std::move(cache));
        h = std::move(out);
      }
      out_batch.push_back(std::move(h));
    }
    send({MessageKind::Activation, Path::Relay, NodeId::Drone, NodeId::Server,
          msg.batch_id, std::move(out_batch), StrategyId::DirectFC});
  }

  void on_gradient(Message msg, const SendFn& send) {
    contract(msg.payload.size() == caches_[0].size(),
             "drone: gradient batch size does not match forward batch");
    std::array<LstmLayerParams, 2> grads = {zero_like(params_[0]),
                                            zero_like(params_[1])};
    std::vector<Sequence> upstream;
    upstream.reserve(msg.payload.size());
    for (std::size_t i = 0; i < msg.payload.size(); ++i) {
      Sequence d = std::move(msg.payload[i]);
      for (std::size_t l = 2; l-- > 0;) {
        LstmBackwardResult b = lstm_backward(params_[l], caches_[l][i], d);
        auto src = param_arrays(std::as_const(b.grads));
        auto dst = param_arrays(grads[l]);
        for (std::size_t a = 0; a < dst.size(); ++a) add_in_place(*dst[a], *src[a]);
        d = std::move(b.dx_seq);
      }
      upstream.push_back(std::move(d));
    }
    std::vector<Vector*> params_refs;
    std::vector<const Vector*> grad_refs;
    for (std::size_t l = 0; l < 2; ++l) {
      auto p = param_arrays(params_[l]);
      auto g = param_arrays(std::as_const(grads[l]));
      params_refs.insert(params_refs.end(), p.begin(), p.end());
      grad_refs.insert(grad_refs.end(), g.begin(), g.end());
    }
    adam_step(params_refs, grad_refs, adam_, hyper_);
    send({MessageKind::Gradient, Path::Relay, NodeId::Drone, NodeId::Edge,
          msg.batch_id, std::move(upstream), StrategyId::DirectFC});
  }

  const std::array<LstmLayerParams, 2>& params() const { return params_; }
  const AdamState& adam() const { return adam_; }

 private:
  std::array<LstmLayerParams, 2> params_;
  AdamHyper hyper_;
  std::size_t hidden_;
  AdamState adam_;
  std::array<std::vector<LstmCaches>, 2> caches_;
};

// f_S + FC owner. Computes the joint loss over both paths (four MSE terms)
// and emits the per-path representation gradients back across the links.
class ServerNode {
 public:
  ServerNode(std::array<LstmLayerParams, 3> lstm, FcParams fc,
             const AdamHyper& hyper, std::size_t hidden)
      : lstm_(std::move(lstm)), fc_(std::move(fc)), hyper_(hyper), hidden_(hidden) {
    adam_ = make_adam_state(all_param_refs_const());
  }

  void set_labels(std::vector<double> labels) {
    labels_ = std::move(labels);
    direct_.reset();
    relay_.reset();
  }

  void on_activation(Message msg, const SendFn& send) {
    PathState state;
    state.z_received = std::move(msg.payload);
    state.caches.resize(state.z_received.size());
    const Vector zeros(hidden_, 0.0);
    for (std::size_t i = 0; i < state.z_received.size(); ++i) {
      Sequence h = state.z_received[i];
      for (std::size_t l = 0; l < 3; ++l) {
        auto [out, cache] = lstm_forward(lstm_[l], h, zeros, zeros);
        state.caches[i][l] = std::move(cache);
        h = std::move(out);
      }
      state.y_full.push_back(fc_forward(fc_, h.back()));
      state.y_fc.push_back(fc_forward(fc_, state.z_received[i].back()));
    }
    if (msg.path_tag == Path::Direct) {
      direct_ = std::move(state);
    } else {
      relay_ = std::move(state);
    }
    if (direct_ && relay_) finish_batch(msg.batch_id, send);
  }

  double epoch_loss_sum() const { return loss_sum_; }
  void reset_loss_sum() { loss_sum_ = 0.0; }

  const std::array<LstmLayerParams, 3>& lstm() const { return lstm_; }
  const FcParams& fc() const { return fc_; }
  const AdamState& adam() const { return adam_; }

 private:
  struct PathState {
    std::vector<Sequence> z_received;
    std::vector<std::array<LstmCaches, 3>> caches;
    std::vector<double> y_full;
    std::vector<double> y_fc;
  };

  std::vector<const Vector*> all_param_refs_const() const {
    std::vector<const Vector*> refs;
    for (const auto& layer : lstm_) {
      auto arrays = param_arrays(layer);
      refs.insert(refs.end(), arrays.begin(), arrays.end());
    }
    auto fc_arrays = param_arrays(fc_);
    refs.insert(refs.end(), fc_arrays.begin(), fc_arrays.end());
    return refs;
  }

  // Reverse pass of one path for one sample; gradients are scaled by 1/B so
  // the wire carries the batch-mean loss gradient.
  Sequence backprop_sample(const PathState& state, std::size_t i, double label,
                           double inv_batch,
                           std::array<LstmLayerParams, 3>& lstm_grads,
                           FcParams& fc_grads) {
    const double dy_full = inv_batch * 2.0 * (state.y_full[i] - label);
    const double dy_fc = inv_batch * 2.0 * (state.y_fc[i] - label);

    const Vector& top_last = state.caches[i][2].steps.back().h;
    FcBackwardResult fc_full = fc_backward(fc_, top_last, dy_full);
    add_in_place(fc_grads.w.data(), fc_full.grads.w.data());
    add_in_place(fc_grads.b, fc_full.grads.b);

    const std::size_t steps = state.z_received[i].size();
    Sequence dh = zero_seq(steps, hidden_);
    dh.back() = fc_full.dh;
    for (std::size_t l = 3; l-- > 0;) {
      LstmBackwardResult b = lstm_backward(lstm_[l], state.caches[i][l], dh);
      auto src = param_arrays(std::as_const(b.grads));
      auto dst = param_arrays(lstm_grads[l]);
      for (std::size_t a = 0; a < dst.size(); ++a) add_in_place(*dst[a], *src[a]);
      dh = std::move(b.dx_seq);
    }

    FcBackwardResult fc_exit = fc_backward(fc_, state.z_received[i].back(), dy_fc);
    add_in_place(fc_grads.w.data(), fc_exit.grads.w.data());
    add_in_place(fc_grads.b, fc_exit.grads.b);
    add_in_place(dh.back(), fc_exit.dh);
    return dh;
  }

  void finish_batch(std::uint64_t batch_id, const SendFn& send) {
    const std::size_t batch = labels_.size();
    contract(direct_->y_full.size() == batch && relay_->y_full.size() == batch,
             "server: activation batch size does not match label batch");
    const double inv_batch = 1.0 / static_cast<double>(batch);

    for (std::size_t i = 0; i < batch; ++i) {
      const double y = labels_[i];
      auto sq = [](double e) { return e * e; };
      loss_sum_ += sq(y - direct_->y_full[i]) + sq(y - direct_->y_fc[i]) +
                   sq(y - relay_->y_full[i]) + sq(y - relay_->y_fc[i]);
    }

    std::array<LstmLayerParams, 3> lstm_grads = {
        zero_like(lstm_[0]), zero_like(lstm_[1]), zero_like(lstm_[2])};
    FcParams fc_grads = zero_like(fc_);

    std::vector<Sequence> d_direct(batch), d_relay(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      d_direct[i] = backprop_sample(*direct_, i, labels_[i], inv_batch,
                                    lstm_grads, fc_grads);
      d_relay[i] = backprop_sample(*relay_, i, labels_[i], inv_batch,
                                   lstm_grads, fc_grads);
    }

    std::vector<Vector*> params_refs;
    std::vector<const Vector*> grad_refs;
    for (std::size_t l = 0; l < 3; ++l) {
      auto p = param_arrays(lstm_[l]);
      auto g = param_arrays(std::as_const(lstm_grads[l]));
      params_refs.insert(params_refs.end(), p.begin(), p.end());
      grad_refs.insert(grad_refs.end(), g.begin(), g.end());
    }
    auto pf = param_arrays(fc_);
    auto gf = param_arrays(std::as_const(fc_grads));
    params_refs.insert(params_refs.end(), pf.begin(), pf.end());
    grad_refs.insert(grad_refs.end(), gf.begin(), gf.end());
    adam_step(params_refs, grad_refs, adam_, hyper_);

    send({MessageKind::Gradient, Path::Direct, NodeId::Server, NodeId::Edge,
          batch_id, std::move(d_direct), StrategyId::DirectFC});
    send({MessageKind::Gradient, Path::Relay, NodeId::Server, NodeId::Drone,
          batch_id, std::move(d_relay), StrategyId::DirectFC});
    direct_.reset();
    relay_.reset();
  }

  std::array<LstmLayerParams, 3> lstm_;
  FcParams fc_;
  AdamHyper hyper_;
  std::size_t hidden_;
  AdamState adam_;
  std::vector<double> labels_;
  std::optional<PathState> direct_;
  std::optional<PathState> relay_;
  double loss_sum_ = 0.0;
};

void validate_config(const SessionConfig& config, const std::vector<Sample>& train) {
  if (train.empty()) throw ConfigError("run_training_session: empty training set");
  if (config.batch_size < 1) throw ConfigError("run_training_session: batch_size must be >= 1");
  for (double p : {config.p_es, config.p_ed, config.p_ds}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("run_training_session: erasure probability " +
                        std::to_string(p) + " outside [0, 1]");
    }
  }
  if (config.hidden < 1 || config.steps < 1) {
    throw ConfigError("run_training_session: hidden and steps must be positive");
  }
  const std::size_t width = train[0].features.size();
  if (width < config.steps) {
    throw ConfigError("run_training_session: feature count " +
                      std::to_string(width) + " smaller than lookback " +
                      std::to_string(config.steps));
  }
  for (const Sample& s : train) {
    if (s.features.size() != width) {
      throw ConfigError("run_training_session: ragged feature widths");
    }
  }
}

}  // namespace

SessionResult run_training_session(const SessionConfig& config,
                                   const std::vector<Sample>& train) {
  validate_config(config, train);

  NetworkDims dims;
  dims.steps = config.steps;
  dims.hidden = config.hidden;
  dims.input_width = train[0].features.size() - config.steps + 1;
  dims.feature_count = train[0].features.size();

  SplitNetwork init = init_split_network(mix_seed(config.seed, 1000), dims);

  EdgeNode edge(init.edge, config.hyper, dims);
  DroneNode drone(init.drone, config.hyper, dims.hidden);
  ServerNode server(init.server_lstm, init.server_fc, config.hyper, dims.hidden);

  LinkChannel link_es(Link::EdgeServer, config.p_es, mix_seed(config.seed, 2001));
  LinkChannel link_ed(Link::EdgeDrone, config.p_ed, mix_seed(config.seed, 2002));
  LinkChannel link_ds(Link::DroneServer, config.p_ds, mix_seed(config.seed, 2003));

  auto link_for = [&](NodeId a, NodeId b) -> LinkChannel& {
    if ((a == NodeId::Edge && b == NodeId::Server) ||
        (a == NodeId::Server && b == NodeId::Edge)) {
      return link_es;
    }
    if ((a == NodeId::Edge && b == NodeId::Drone) ||
        (a == NodeId::Drone && b == NodeId::Edge)) {
      return link_ed;
    }
    return link_ds;
  };

  std::deque<Message> queue;
  SendFn send = [&](Message msg) {
    link_for(msg.from, msg.to).traverse(msg);
    queue.push_back(std::move(msg));
  };

  Rng shuffle_rng(mix_seed(config.seed, 3000));
  TrainingLog log;
  std::uint64_t batch_id = 0;
  std::uint64_t batches = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    // Seeded Fisher-Yates; batch composition is part of the session seed.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(shuffle_rng.uniform() * static_cast<double>(i));
      std::swap(order[i - 1], order[j < i ? j : i - 1]);
    }
    server.reset_loss_sum();
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<const Sample*> batch;
      std::vector<double> labels;
      batch.reserve(end - begin);
      labels.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        batch.push_back(&train[order[k]]);
        labels.push_back(train[order[k]].label);
      }
      server.set_labels(std::move(labels));
      edge.start_batch(batch, batch_id, send);
      while (!queue.empty()) {
        Message msg = std::move(queue.front());
        queue.pop_front();
        switch (msg.to) {
          case NodeId::Drone:
            if (msg.kind == MessageKind::Activation) {
              drone.on_activation(std::move(msg), send);
            } else {
              drone.on_gradient(std::move(msg), send);
            }
            break;
          case NodeId::Server:
            server.on_activation(std::move(msg), send);
            break;
          case NodeId::Edge:
            edge.on_gradient(std::move(msg));
            break;
        }
      }
      ++batch_id;
      ++batches;
    }
    // Joint loss of Eq(2) summed over both paths, averaged over the epoch.
    log.epoch_mean_loss.push_back(server.epoch_loss_sum() /
                                  static_cast<double>(train.size()));
  }

  SessionResult result;
  result.net.dims = dims;
  result.net.edge = edge.params();
  result.net.drone = drone.params();
  result.net.server_lstm = server.lstm();
  result.net.server_fc = server.fc();
  result.log = std::move(log);
  result.messages.edge_server = link_es.counters;
  result.messages.edge_drone = link_ed.counters;
  result.messages.drone_server = link_ds.counters;
  result.messages.batches = batches;
  result.edge_adam = edge.adam();
  result.drone_adam = drone.adam();
  result.server_adam = server.adam();
  return result;
}

double evaluate(const SplitNetwork& net, const std::vector<Sample>& samples,
                StrategyId strategy, const LinkProbs& probs, std::uint64_t seed,
                std::size_t repeats) {
  contract(repeats >= 1, "evaluate: repeats must be >= 1");
  if (samples.empty()) throw ConfigError("evaluate: empty sample set");
  Rng rng(seed);
  double sum = 0.0;
  std::size_t count = 0;
  for (const Sample& s : samples) {
    const Sequence x = sequence_from_sample(s.features, net.dims);
    for (std::size_t r = 0; r < repeats; ++r) {
      const double y_hat = predict(net, strategy, x, rng, probs);
      const double err = y_hat - s.label;
      sum += err * err;
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

StrategyId select_from_mse(const std::array<double, 4>& mse,
                           const CostModel& costs, double tolerance) {
  const double min_mse = *std::min_element(mse.begin(), mse.end());
  StrategyId chosen = StrategyId::DirectFull;
  int chosen_rank = 5;
  for (std::size_t k = 0; k < 4; ++k) {
    const StrategyId s = kAllStrategies[k];
    const bool competitive = mse[k] == min_mse || (mse[k] - min_mse) < tolerance;
    if (!competitive) continue;
    const int rank = cost_rank(costs, s);
    if (rank < chosen_rank) {
      chosen_rank = rank;
      chosen = s;
    }
  }
  return chosen;
}

SelectionReport select_strategy_report(const SplitNetwork& net,
                                       const std::vector<Sample>& probe,
                                       const LinkProbs& estimates,
                                       double tolerance, std::uint64_t seed) {
  if (probe.empty()) throw ConfigError("select_strategy: empty probe set");
  SelectionReport report;
  report.tolerance = tolerance;
  const CostModel costs = cost_model(net.dims);
  for (std::size_t k = 0; k < 4; ++k) {
    report.mse[k] = evaluate(net, probe, kAllStrategies[k], estimates,
                             mix_seed(seed, k), 20);
    report.cost_ranks[k] = cost_rank(costs, kAllStrategies[k]);
  }
  report.chosen = select_from_mse(report.mse, costs, tolerance);
  return report;
}

StrategyId select_strategy(const SplitNetwork& net,
                           const std::vector<Sample>& probe,
                           const LinkProbs& estimates, double tolerance,
                           std::uint64_t seed) {
  return select_strategy_report(net, probe, estimates, tolerance, seed).chosen;
}

}  // namespace splitsim
