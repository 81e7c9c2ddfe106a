// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "splitsim/error.hpp"
#include "splitsim/format.hpp"
#include "splitsim/rng.hpp"

namespace splitsim {

namespace {

using nlohmann::json;

constexpr std::uint64_t kEvalSalt = 0xE7A1;

std::size_t grid_index(const ExperimentConfig& cfg, double p1) {
  for (std::size_t i = 0; i < cfg.p1_grid.size(); ++i) {
    if (cfg.p1_grid[i] == p1) return i;
  }
  throw ContractViolation("grid_index: p1 not on the grid");
}

}  // namespace

ExperimentConfig default_config(char scenario) {
  ExperimentConfig cfg;
  cfg.scenario = scenario;
  apply_scenario_probs(cfg);
  return cfg;
}

void apply_scenario_probs(ExperimentConfig& cfg) {
  if (cfg.scenario == 'A') {
    cfg.p_ed_train = 0.5;
    cfg.p_es_train = 0.1;
  } else if (cfg.scenario == 'B') {
    cfg.p_ed_train = 0.1;
    cfg.p_es_train = 0.5;
  } else {
    throw ConfigError(std::string("unknown scenario '") + cfg.scenario +
                      "' (expected A or B)");
  }
  cfg.p_ds_train = 0.05;
}

json config_to_json(const ExperimentConfig& cfg) {
  json dataset;
  if (cfg.dataset.kind == DatasetSource::Kind::Synthetic) {
    dataset = json{{"kind", "synthetic"},
                   {"days", cfg.dataset.days},
                   {"seed", cfg.dataset.seed}};
  } else {
    dataset = json{{"kind", "csv"}, {"path", cfg.dataset.csv_path}};
  }
  return json{{"scenario", std::string(1, cfg.scenario)},
              {"train_probs",
               json{{"p_es", cfg.p_es_train},
                    {"p_ed", cfg.p_ed_train},
                    {"p_ds", cfg.p_ds_train}}},
              {"p_ds_test", cfg.p_ds_test},
              {"seeds", cfg.seeds},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.hyper.alpha},
              {"beta1", cfg.hyper.beta1},
              {"beta2", cfg.hyper.beta2},
              {"epsilon", cfg.hyper.epsilon},
              {"hidden", cfg.hidden},
              {"lookback", cfg.lookback},
              {"dataset", std::move(dataset)},
              {"p1_grid", cfg.p1_grid},
              {"repeats", cfg.repeats}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    const std::string scenario = j.value("scenario", "A");
    if (scenario.size() != 1) throw ConfigError("scenario must be A or B");
    cfg.scenario = scenario[0];
    apply_scenario_probs(cfg);
    if (j.contains("train_probs")) {
      const json& tp = j.at("train_probs");
      cfg.p_es_train = tp.value("p_es", cfg.p_es_train);
      cfg.p_ed_train = tp.value("p_ed", cfg.p_ed_train);
      cfg.p_ds_train = tp.value("p_ds", cfg.p_ds_train);
    }
    cfg.p_ds_test = j.value("p_ds_test", cfg.p_ds_test);
    cfg.seeds = j.value("seeds", cfg.seeds);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.hyper.alpha = j.value("learning_rate", cfg.hyper.alpha);
    cfg.hyper.beta1 = j.value("beta1", cfg.hyper.beta1);
    cfg.hyper.beta2 = j.value("beta2", cfg.hyper.beta2);
    cfg.hyper.epsilon = j.value("epsilon", cfg.hyper.epsilon);
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.lookback = j.value("lookback", cfg.lookback);
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      const std::string kind = d.value("kind", "synthetic");
      if (kind == "synthetic") {
        cfg.dataset.kind = DatasetSource::Kind::Synthetic;
        cfg.dataset.days = d.value("days", cfg.dataset.days);
        cfg.dataset.seed = d.value("seed", cfg.dataset.seed);
      } else if (kind == "csv") {
        cfg.dataset.kind = DatasetSource::Kind::Csv;
        cfg.dataset.csv_path = d.at("path").get<std::string>();
      } else {
        throw ConfigError("dataset.kind must be 'synthetic' or 'csv'");
      }
    }
    cfg.p1_grid = j.value("p1_grid", cfg.p1_grid);
    cfg.repeats = j.value("repeats", cfg.repeats);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  for (double p1 : cfg.p1_grid) p2_for(p1);  // validates p2 >= 0
  return cfg;
}

double p2_for(double p1) {
  const double scaled = p1 * 10.0;
  const long long tenths = std::llround(scaled);
  double p2;
  if (std::abs(scaled - static_cast<double>(tenths)) < 1e-9) {
    p2 = static_cast<double>(tenths - 3) / 10.0;
  } else {
    p2 = p1 - 0.3;
  }
  if (p2 < 0.0) {
    throw ConfigError("p1 = " + fmt_double(p1) +
                      " gives negative p2 = p1 - 0.3");
  }
  return p2;
}

LinkProbs test_probs(const ExperimentConfig& cfg, double p1) {
  const double p2 = p2_for(p1);
  LinkProbs probs;
  probs.drone_server = cfg.p_ds_test;
  if (cfg.scenario == 'A') {
    // Training distorted the edge-drone link most; p1 stays on it.
    probs.edge_drone = p1;
    probs.edge_server = p2;
  } else {
    probs.edge_server = p1;
    probs.edge_drone = p2;
  }
  return probs;
}

LinkProbs train_probs(const ExperimentConfig& cfg) {
  LinkProbs probs;
  probs.edge_server = cfg.p_es_train;
  probs.edge_drone = cfg.p_ed_train;
  probs.drone_server = cfg.p_ds_train;
  return probs;
}

RawSeries load_series(const DatasetSource& source) {
  if (source.kind == DatasetSource::Kind::Synthetic) {
    return generate_synthetic(source.seed, source.days);
  }
  return ingest_csv(source.csv_path);
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  const RawSeries series = load_series(cfg.dataset);
  const std::vector<Sample> samples = make_windows(series, cfg.lookback);
  const SplitData split = chrono_split(samples, 0.7);
  PreparedData data;
  data.stats = fit_normalizer(split.train);
  data.train = apply_normalizer(data.stats, split.train);
  data.test = apply_normalizer(data.stats, split.test);
  return data;
}

TrainedModel train_model(const ExperimentConfig& cfg, std::uint64_t seed) {
  const PreparedData data = prepare_data(cfg);

  SessionConfig session;
  session.seed = seed;
  session.epochs = cfg.epochs;
  session.batch_size = cfg.batch_size;
  session.p_es = cfg.p_es_train;
  session.p_ed = cfg.p_ed_train;
  session.p_ds = cfg.p_ds_train;
  session.hyper = cfg.hyper;
  session.hidden = cfg.hidden;
  session.steps = cfg.lookback;

  SessionResult result = run_training_session(session, data.train);

  TrainedModel model;
  model.ckpt.net = std::move(result.net);
  model.ckpt.edge_adam = std::move(result.edge_adam);
  model.ckpt.drone_adam = std::move(result.drone_adam);
  model.ckpt.server_adam = std::move(result.server_adam);
  model.ckpt.normalizer = data.stats;
  json echo = config_to_json(cfg);
  echo["seed"] = seed;
  model.ckpt.config_echo = std::move(echo);
  model.log = std::move(result.log);
  model.messages = result.messages;
  return model;
}

std::vector<MetricRow> sweep_model(const ExperimentConfig& cfg,
                                   const SplitNetwork& net,
                                   const std::vector<Sample>& test,
                                   std::uint64_t seed) {
  std::vector<MetricRow> rows;
  rows.reserve(cfg.p1_grid.size() * 4);
  for (std::size_t gi = 0; gi < cfg.p1_grid.size(); ++gi) {
    const double p1 = cfg.p1_grid[gi];
    const LinkProbs probs = test_probs(cfg, p1);
    for (std::size_t si = 0; si < 4; ++si) {
      const std::uint64_t eval_seed =
          mix_seed(mix_seed(seed, kEvalSalt), gi * 4 + si);
      MetricRow row;
      row.scenario = cfg.scenario;
      row.strategy = kAllStrategies[si];
      row.p1 = p1;
      row.p2 = p2_for(p1);
      row.seed = seed;
      row.mse = evaluate(net, test, kAllStrategies[si], probs, eval_seed,
                         cfg.repeats);
      rows.push_back(row);
    }
  }
  return rows;
}

namespace {

void sort_rows(std::vector<MetricRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::make_tuple(static_cast<int>(a.strategy), a.p1, a.seed) <
           std::make_tuple(static_cast<int>(b.strategy), b.p1, b.seed);
  });
}

}  // namespace

std::string metrics_to_csv(std::vector<MetricRow> rows) {
  sort_rows(rows);
  std::string out = "scenario,strategy,p1,p2,seed,mse\n";
  for (const MetricRow& r : rows) {
    out += r.scenario;
    out += ',';
    out += strategy_name(r.strategy);
    out += ',';
    out += fmt_double(r.p1);
    out += ',';
    out += fmt_double(r.p2);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += fmt_double(r.mse);
    out += '\n';
  }
  return out;
}

std::string means_to_csv(std::vector<MetricRow> rows) {
  sort_rows(rows);
  std::string out = "scenario,strategy,p1,p2,mean_mse\n";
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < rows.size() && rows[j].strategy == rows[i].strategy &&
           rows[j].p1 == rows[i].p1) {
      sum += rows[j].mse;
      ++j;
    }
    const MetricRow& r = rows[i];
    out += r.scenario;
    out += ',';
    out += strategy_name(r.strategy);
    out += ',';
    out += fmt_double(r.p1);
    out += ',';
    out += fmt_double(r.p2);
    out += ',';
    out += fmt_double(sum / static_cast<double>(j - i));
    out += '\n';
    i = j;
  }
  return out;
}

std::vector<std::vector<double>> mean_matrix(const ExperimentConfig& cfg,
                                             const std::vector<MetricRow>& rows) {
  std::vector<std::vector<double>> mean(4,
                                        std::vector<double>(cfg.p1_grid.size(), 0.0));
  std::vector<std::vector<std::size_t>> count(
      4, std::vector<std::size_t>(cfg.p1_grid.size(), 0));
  for (const MetricRow& r : rows) {
    const std::size_t si = static_cast<std::size_t>(r.strategy);
    const std::size_t gi = grid_index(cfg, r.p1);
    mean[si][gi] += r.mse;
    count[si][gi] += 1;
  }
  for (std::size_t si = 0; si < 4; ++si) {
    for (std::size_t gi = 0; gi < cfg.p1_grid.size(); ++gi) {
      contract(count[si][gi] > 0, "mean_matrix: missing sweep cell");
      mean[si][gi] /= static_cast<double>(count[si][gi]);
    }
  }
  return mean;
}

}  // namespace splitsim
