// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "splitsim/checkpoint.hpp"
#include "splitsim/dataset.hpp"
#include "splitsim/orchestrator.hpp"

namespace splitsim {

struct DatasetSource {
  enum class Kind { Synthetic, Csv };
  Kind kind = Kind::Synthetic;
  std::size_t days = 3264;
  std::uint64_t seed = 7;
  std::string csv_path;
};

// ---------------------------------------------------------------------------
// Two canonical training scenarios:
//   A: edge-drone link heavily erased in training (p_ED = 0.5, p_ES = 0.1);
//      at test time p1 sweeps the edge-drone link, p2 = p1 - 0.3 the direct.
//   B: the mirror image (p_ES = 0.5, p_ED = 0.1); p1 sweeps the direct link.
// The drone-server backhaul stays at 0.05 in both phases.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  char scenario = 'A';
  double p_es_train = 0.1;
  double p_ed_train = 0.5;
  double p_ds_train = 0.05;
  double p_ds_test = 0.05;

  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::size_t epochs = 60;
  std::size_t batch_size = 64;
  AdamHyper hyper;
  std::size_t hidden = 10;
  std::size_t lookback = 20;

  DatasetSource dataset;
  std::vector<double> p1_grid = {0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t repeats = 20;
};

/// Scenario defaults with everything else left at struct defaults.
ExperimentConfig default_config(char scenario);

/// Re-derives the train probabilities from cfg.scenario.
void apply_scenario_probs(ExperimentConfig& cfg);

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// p2 = p1 - 0.3, snapped to the tenths grid when p1 lies on it (so 0.4
/// maps to 0.1, not 0.10000000000000003). Negative results are rejected.
double p2_for(double p1);

/// Test-time link probabilities for one grid point under the scenario's
/// p1/p2 link assignment.
LinkProbs test_probs(const ExperimentConfig& cfg, double p1);

/// Training-time probabilities as channel estimates (used by `select`).
LinkProbs train_probs(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Pipeline kernels shared by the CLI and the acceptance suite.
// ---------------------------------------------------------------------------

struct PreparedData {
  NormStats stats;                // fitted on the training split only
  std::vector<Sample> train;      // normalized
  std::vector<Sample> test;       // normalized with the train-fitted stats
};

RawSeries load_series(const DatasetSource& source);
PreparedData prepare_data(const ExperimentConfig& cfg);

struct TrainedModel {
  Checkpoint ckpt;
  TrainingLog log;
  MessageStats messages;
};

/// Full pipeline for one seed: data prep, joint-graph training under the
/// scenario's fixed channel conditions, checkpoint assembly.
TrainedModel train_model(const ExperimentConfig& cfg, std::uint64_t seed);

struct MetricRow {
  char scenario;
  StrategyId strategy;
  double p1;
  double p2;
  std::uint64_t seed;
  double mse;
};

/// Evaluates one trained model over the whole grid x strategy matrix.
std::vector<MetricRow> sweep_model(const ExperimentConfig& cfg,
                                   const SplitNetwork& net,
                                   const std::vector<Sample>& test,
                                   std::uint64_t seed);

/// Rows sorted by (strategy, p1, seed); schema
/// scenario,strategy,p1,p2,seed,mse.
std::string metrics_to_csv(std::vector<MetricRow> rows);

/// Per-(strategy, p1) means over seeds; schema scenario,strategy,p1,p2,mean_mse.
std::string means_to_csv(std::vector<MetricRow> rows);

/// Mean MSE keyed by (strategy, p1 grid index); helper for analyses.
std::vector<std::vector<double>> mean_matrix(const ExperimentConfig& cfg,
                                             const std::vector<MetricRow>& rows);

}  // namespace splitsim
