// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/cli.hpp"

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "splitsim/checkpoint.hpp"
#include "splitsim/error.hpp"
#include "splitsim/experiment.hpp"
#include "splitsim/format.hpp"
#include "splitsim/rng.hpp"

namespace splitsim::cli {

namespace {

using nlohmann::json;

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t k = std::min(threads, n);
  pool.reserve(k);
  for (std::size_t w = 0; w < k; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

std::string training_log_csv(const TrainingLog& log) {
  std::string out = "epoch,mean_loss\n";
  for (std::size_t e = 0; e < log.epoch_mean_loss.size(); ++e) {
    out += std::to_string(e + 1);
    out += ',';
    out += fmt_double(log.epoch_mean_loss[e]);
    out += '\n';
  }
  return out;
}

std::string default_log_path(const std::string& ckpt_path) {
  std::string stem = ckpt_path;
  const std::string suffix = ".json";
  if (stem.size() > suffix.size() &&
      stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0) {
    stem.resize(stem.size() - suffix.size());
  }
  return stem + "_train_log.csv";
}

// --- shared dataset flags -------------------------------------------------

struct DatasetFlags {
  std::string csv_path;
  std::size_t days = 0;
  std::uint64_t data_seed = 7;
};

void add_dataset_flags(CLI::App* cmd, DatasetFlags& flags) {
  cmd->add_option("--data", flags.csv_path, "CSV dataset path");
  cmd->add_option("--days", flags.days, "synthetic dataset length in days");
  cmd->add_option("--data-seed", flags.data_seed,
                  "synthetic dataset seed (default 7)");
}

/// Explicit flags win; otherwise fall back to the checkpoint's config echo,
/// then to the default synthetic source.
DatasetSource resolve_dataset(const DatasetFlags& flags, const json* echo) {
  DatasetSource src;
  if (!flags.csv_path.empty()) {
    src.kind = DatasetSource::Kind::Csv;
    src.csv_path = flags.csv_path;
    return src;
  }
  if (flags.days > 0) {
    src.kind = DatasetSource::Kind::Synthetic;
    src.days = flags.days;
    src.seed = flags.data_seed;
    return src;
  }
  if (echo != nullptr && echo->contains("dataset")) {
    const json& d = echo->at("dataset");
    if (d.value("kind", "synthetic") == "csv") {
      src.kind = DatasetSource::Kind::Csv;
      src.csv_path = d.at("path").get<std::string>();
    } else {
      src.days = d.value("days", src.days);
      src.seed = d.value("seed", src.seed);
    }
  }
  return src;
}

/// Test split of the dataset, normalized with the checkpoint's stats.
std::vector<Sample> test_split_for(const Checkpoint& ckpt,
                                   const DatasetSource& source) {
  const RawSeries series = load_series(source);
  const std::vector<Sample> samples = make_windows(series, ckpt.net.dims.steps);
  if (!samples.empty() &&
      samples[0].features.size() != ckpt.net.dims.feature_count) {
    throw ConfigError("dataset feature count " +
                      std::to_string(samples[0].features.size()) +
                      " does not match checkpoint dims (" +
                      std::to_string(ckpt.net.dims.feature_count) + ")");
  }
  const SplitData split = chrono_split(samples, 0.7);
  return apply_normalizer(ckpt.normalizer, split.test);
}

// --- train config assembly ------------------------------------------------

struct TrainFlags {
  std::string config_path;
  std::string scenario = "A";
  std::uint64_t seed = 1;
  std::size_t epochs = 0;  // 0 = keep config default
  bool epochs_set = false;
  std::size_t batch_size = 0;
  double lr = -1.0;
  double p_es = -1.0, p_ed = -1.0, p_ds = -1.0;
  DatasetFlags dataset;
};

ExperimentConfig assemble_config(const TrainFlags& flags, bool scenario_given,
                                 bool epochs_given) {
  ExperimentConfig cfg;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw IoError("cannot open config: " + flags.config_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError("invalid config JSON in " + flags.config_path + ": " +
                        e.what());
    }
    cfg = config_from_json(j);
  } else {
    cfg = default_config('A');
  }
  if (scenario_given || flags.config_path.empty()) {
    if (flags.scenario.size() != 1) throw ConfigError("scenario must be A or B");
    cfg.scenario = flags.scenario[0];
    apply_scenario_probs(cfg);
  }
  if (epochs_given) cfg.epochs = flags.epochs;
  if (flags.batch_size > 0) cfg.batch_size = flags.batch_size;
  if (flags.lr > 0.0) cfg.hyper.alpha = flags.lr;
  if (flags.p_es >= 0.0) cfg.p_es_train = flags.p_es;
  if (flags.p_ed >= 0.0) cfg.p_ed_train = flags.p_ed;
  if (flags.p_ds >= 0.0) cfg.p_ds_train = flags.p_ds;
  if (!flags.dataset.csv_path.empty() || flags.dataset.days > 0) {
    cfg.dataset = resolve_dataset(flags.dataset, nullptr);
  }
  return cfg;
}

json selection_report_json(const SelectionReport& report, const LinkProbs& probs,
                           double tolerance, std::uint64_t seed) {
  json strategies = json::object();
  for (std::size_t k = 0; k < 4; ++k) {
    strategies[strategy_name(kAllStrategies[k])] =
        json{{"mse", report.mse[k]}, {"cost_rank", report.cost_ranks[k]}};
  }
  return json{{"strategies", std::move(strategies)},
              {"tolerance", tolerance},
              {"seed", seed},
              {"channel_estimates",
               json{{"p_es", probs.edge_server.value_or(0.0)},
                    {"p_ed", probs.edge_drone.value_or(0.0)},
                    {"p_ds", probs.drone_server.value_or(0.0)}}},
              {"chosen", strategy_name(report.chosen)}};
}

std::string sweep_ckpt_path(const std::string& dir, char scenario,
                            std::uint64_t seed) {
  return dir + "/scenario_" + std::string(1, scenario) + "_seed" +
         std::to_string(seed) + ".json";
}

std::string mean_csv_path(const std::string& metrics_path) {
  const std::string suffix = ".csv";
  std::string stem = metrics_path;
  if (stem.size() > suffix.size() &&
      stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0) {
    stem.resize(stem.size() - suffix.size());
  }
  return stem + "_mean.csv";
}

// --- commands ---------------------------------------------------------------

void cmd_gen_data(std::size_t days, std::uint64_t seed, const std::string& out,
                  const std::string& start_date) {
  CivilDate start;
  if (!parse_iso_date(start_date, start)) {
    throw ConfigError("invalid --start-date '" + start_date +
                      "' (expected YYYY-MM-DD)");
  }
  const RawSeries series = generate_synthetic(seed, days, start);
  write_csv(series, out);
  std::cout << "wrote " << series.days() << " data rows to " << out << "\n";
}

void cmd_train(const ExperimentConfig& cfg, std::uint64_t seed,
               const std::string& out, std::string log_path) {
  TrainedModel model = train_model(cfg, seed);
  save_checkpoint(model.ckpt, out);
  if (log_path.empty()) log_path = default_log_path(out);
  write_file(log_path, training_log_csv(model.log));
  std::cout << "checkpoint: " << out << "\n";
  std::cout << "training log: " << log_path << "\n";
  if (!model.log.epoch_mean_loss.empty()) {
    std::cout << "final mean training loss: "
              << fmt_double(model.log.epoch_mean_loss.back()) << "\n";
  }
}

void cmd_eval(const std::string& ckpt_path, const DatasetFlags& data_flags,
              const std::string& strategy_sel, double p_es, double p_ed,
              double p_ds, std::size_t repeats, std::uint64_t seed,
              const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const DatasetSource source = resolve_dataset(data_flags, &ckpt.config_echo);
  const std::vector<Sample> test = test_split_for(ckpt, source);

  LinkProbs probs;
  probs.edge_server = p_es;
  probs.edge_drone = p_ed;
  probs.drone_server = p_ds;

  std::vector<StrategyId> strategies;
  if (strategy_sel == "all") {
    strategies.assign(kAllStrategies.begin(), kAllStrategies.end());
  } else {
    const auto s = strategy_from_name(strategy_sel);
    if (!s) {
      throw ConfigError("unknown strategy '" + strategy_sel +
                        "' (expected direct_full, direct_fc, relay_full, "
                        "relay_fc or all)");
    }
    strategies.push_back(*s);
  }

  json report = json::object();
  for (StrategyId s : strategies) {
    const double mse =
        evaluate(ckpt.net, test, s, probs, mix_seed(seed, static_cast<std::uint64_t>(s)),
                 repeats);
    std::cout << strategy_name(s) << " " << fmt_double(mse) << "\n";
    report[strategy_name(s)] = mse;
  }
  if (!out.empty()) write_file(out, report.dump() + "\n");
}

void cmd_sweep(const ExperimentConfig& cfg, const std::string& out,
               const std::string& ckpt_dir, bool train_first,
               std::size_t threads) {
  if (ckpt_dir.empty() && !train_first) {
    throw ConfigError("sweep needs --ckpt-dir with existing checkpoints, or "
                      "--train-first to train them now");
  }
  if (!ckpt_dir.empty() && train_first) {
    std::filesystem::create_directories(ckpt_dir);
  }

  const std::size_t n_models = cfg.seeds.size();
  std::vector<Checkpoint> models(n_models);
  std::vector<std::vector<Sample>> tests(n_models);

  parallel_for(n_models, threads, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    const std::string path =
        ckpt_dir.empty() ? "" : sweep_ckpt_path(ckpt_dir, cfg.scenario, seed);
    if (!path.empty() && std::filesystem::exists(path)) {
      models[i] = load_checkpoint(path);
    } else if (train_first) {
      models[i] = train_model(cfg, seed).ckpt;
      if (!path.empty()) save_checkpoint(models[i], path);
    } else {
      throw IoError("checkpoint not found: " + path +
                    " (run with --train-first to train it)");
    }
    tests[i] = test_split_for(models[i], cfg.dataset);
  });

  // One task per (model, grid point); results land in fixed slots so thread
  // scheduling cannot affect the output bytes.
  const std::size_t n_cells = n_models * cfg.p1_grid.size();
  std::vector<std::vector<MetricRow>> cells(n_cells);
  parallel_for(n_cells, threads, [&](std::size_t c) {
    const std::size_t i = c / cfg.p1_grid.size();
    const std::size_t gi = c % cfg.p1_grid.size();
    const double p1 = cfg.p1_grid[gi];
    const LinkProbs probs = test_probs(cfg, p1);
    std::vector<MetricRow> rows;
    for (std::size_t si = 0; si < 4; ++si) {
      const std::uint64_t eval_seed =
          mix_seed(mix_seed(cfg.seeds[i], 0xE7A1), gi * 4 + si);
      MetricRow row;
      row.scenario = cfg.scenario;
      row.strategy = kAllStrategies[si];
      row.p1 = p1;
      row.p2 = p2_for(p1);
      row.seed = cfg.seeds[i];
      row.mse = evaluate(models[i].net, tests[i], kAllStrategies[si], probs,
                         eval_seed, cfg.repeats);
      rows.push_back(row);
    }
    cells[c] = std::move(rows);
  });

  std::vector<MetricRow> all_rows;
  all_rows.reserve(n_cells * 4);
  for (const auto& cell : cells) {
    all_rows.insert(all_rows.end(), cell.begin(), cell.end());
  }
  write_file(out, metrics_to_csv(all_rows));
  const std::string mean_path = mean_csv_path(out);
  write_file(mean_path, means_to_csv(all_rows));
  std::cout << "metrics: " << out << "\n";
  std::cout << "per-strategy means: " << mean_path << "\n";
}

void cmd_select(const std::string& ckpt_path, const DatasetFlags& data_flags,
                std::optional<double> p_es, std::optional<double> p_ed,
                std::optional<double> p_ds, double tolerance,
                std::uint64_t seed, std::size_t probe_count,
                const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const DatasetSource source = resolve_dataset(data_flags, &ckpt.config_echo);
  std::vector<Sample> probe = test_split_for(ckpt, source);
  if (probe_count > 0 && probe_count < probe.size()) probe.resize(probe_count);

  LinkProbs probs;
  // Fall back to the training-time channel conditions recorded in the
  // checkpoint; these are the natural channel estimates.
  const json& echo = ckpt.config_echo;
  const json tp = echo.contains("train_probs") ? echo.at("train_probs") : json::object();
  probs.edge_server = p_es ? *p_es : tp.value("p_es", 0.0);
  probs.edge_drone = p_ed ? *p_ed : tp.value("p_ed", 0.0);
  probs.drone_server = p_ds ? *p_ds : tp.value("p_ds", 0.0);

  const SelectionReport report =
      select_strategy_report(ckpt.net, probe, probs, tolerance, seed);
  std::cout << strategy_name(report.chosen) << "\n";
  if (!out.empty()) {
    write_file(out, selection_report_json(report, probs, tolerance, seed).dump() + "\n");
  }
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Deterministic simulator of UAV-relayed split learning over "
               "erasure channels"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic water-quality CSV");
  std::size_t gen_days = 3264;
  std::uint64_t gen_seed = 7;
  std::string gen_out;
  std::string gen_start = "2013-11-01";
  gen->add_option("--days", gen_days, "series length in days")->capture_default_str();
  gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output CSV path")->required();
  gen->add_option("--start-date", gen_start, "first day (YYYY-MM-DD)")
      ->capture_default_str();
  gen->callback([&] { cmd_gen_data(gen_days, gen_seed, gen_out, gen_start); });

  // train
  auto* train = app.add_subcommand("train", "Train a split network under fixed "
                                            "channel conditions");
  TrainFlags tf;
  std::string train_out;
  std::string train_log;
  auto* sc_opt = train->add_option("--scenario", tf.scenario,
                                   "training scenario (A or B)");
  auto* ep_opt = train->add_option("--epochs", tf.epochs, "training epochs");
  train->add_option("--config", tf.config_path, "experiment config JSON");
  train->add_option("--seed", tf.seed, "session seed")->capture_default_str();
  train->add_option("--batch-size", tf.batch_size, "batch size (default 64)");
  train->add_option("--lr", tf.lr, "Adam learning rate (default 0.01)");
  train->add_option("--p-es", tf.p_es, "override train erasure prob, edge-server");
  train->add_option("--p-ed", tf.p_ed, "override train erasure prob, edge-drone");
  train->add_option("--p-ds", tf.p_ds, "override train erasure prob, drone-server");
  add_dataset_flags(train, tf.dataset);
  train->add_option("--out", train_out, "checkpoint output path")->required();
  train->add_option("--log", train_log, "training-log CSV path");
  train->callback([&] {
    const ExperimentConfig cfg =
        assemble_config(tf, sc_opt->count() > 0, ep_opt->count() > 0);
    cmd_train(cfg, tf.seed, train_out, train_log);
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint at one channel "
                                        "operating point");
  std::string ev_ckpt, ev_strategy = "all", ev_out;
  DatasetFlags ev_data;
  double ev_p_es = 0.0, ev_p_ed = 0.0, ev_p_ds = 0.0;
  std::size_t ev_repeats = 20;
  std::uint64_t ev_seed = 1;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--strategy", ev_strategy,
                 "direct_full|direct_fc|relay_full|relay_fc|all")
      ->capture_default_str();
  ev->add_option("--p-es", ev_p_es, "test erasure prob, edge-server")->capture_default_str();
  ev->add_option("--p-ed", ev_p_ed, "test erasure prob, edge-drone")->capture_default_str();
  ev->add_option("--p-ds", ev_p_ds, "test erasure prob, drone-server")->capture_default_str();
  ev->add_option("--repeats", ev_repeats, "mask redraws per test sample")
      ->capture_default_str();
  ev->add_option("--seed", ev_seed, "evaluation seed")->capture_default_str();
  add_dataset_flags(ev, ev_data);
  ev->add_option("--out", ev_out, "JSON report path");
  ev->callback([&] {
    cmd_eval(ev_ckpt, ev_data, ev_strategy, ev_p_es, ev_p_ed, ev_p_ds,
             ev_repeats, ev_seed, ev_out);
  });

  // sweep
  auto* sw = app.add_subcommand("sweep", "Sweep test erasure probabilities over "
                                         "all four strategies");
  TrainFlags swf;
  std::string sw_out, sw_ckpt_dir;
  bool sw_train_first = false;
  std::vector<std::uint64_t> sw_seeds;
  std::vector<double> sw_grid;
  std::size_t sw_repeats = 0;
  std::size_t sw_threads = std::max(1u, std::thread::hardware_concurrency());
  auto* sw_sc = sw->add_option("--scenario", swf.scenario, "scenario (A or B)");
  auto* sw_ep = sw->add_option("--epochs", swf.epochs, "training epochs (with --train-first)");
  sw->add_option("--config", swf.config_path, "experiment config JSON");
  sw->add_option("--seeds", sw_seeds, "comma-separated session seeds")->delimiter(',');
  sw->add_option("--p1-grid", sw_grid, "comma-separated p1 values")->delimiter(',');
  sw->add_option("--repeats", sw_repeats, "mask redraws per test sample");
  sw->add_option("--batch-size", swf.batch_size, "batch size");
  sw->add_option("--lr", swf.lr, "Adam learning rate");
  add_dataset_flags(sw, swf.dataset);
  sw->add_option("--ckpt-dir", sw_ckpt_dir, "checkpoint directory");
  sw->add_flag("--train-first", sw_train_first, "train missing checkpoints");
  sw->add_option("--threads", sw_threads, "worker threads")->capture_default_str();
  sw->add_option("--out", sw_out, "metrics CSV path")->required();
  sw->callback([&] {
    ExperimentConfig cfg =
        assemble_config(swf, sw_sc->count() > 0, sw_ep->count() > 0);
    if (!sw_seeds.empty()) cfg.seeds = sw_seeds;
    if (!sw_grid.empty()) cfg.p1_grid = sw_grid;
    if (sw_repeats > 0) cfg.repeats = sw_repeats;
    for (double p1 : cfg.p1_grid) p2_for(p1);  // validate before any work
    cmd_sweep(cfg, sw_out, sw_ckpt_dir, sw_train_first, sw_threads);
  });

  // select
  auto* sel = app.add_subcommand("select", "Pick the best transmission strategy "
                                           "under given channel estimates");
  std::string sel_ckpt, sel_out;
  DatasetFlags sel_data;
  double sel_p_es = -1.0, sel_p_ed = -1.0, sel_p_ds = -1.0;
  double sel_tolerance = 1e-3;
  std::uint64_t sel_seed = 1;
  std::size_t sel_probe = 0;
  auto* sel_es = sel->add_option("--p-es", sel_p_es, "channel estimate, edge-server");
  auto* sel_ed = sel->add_option("--p-ed", sel_p_ed, "channel estimate, edge-drone");
  auto* sel_ds = sel->add_option("--p-ds", sel_p_ds, "channel estimate, drone-server");
  sel->add_option("--ckpt", sel_ckpt, "checkpoint path")->required();
  sel->add_option("--tolerance", sel_tolerance,
                  "MSE tolerance for the cheaper-strategy tie-break")
      ->capture_default_str();
  sel->add_option("--seed", sel_seed, "probe seed")->capture_default_str();
  sel->add_option("--probe-count", sel_probe, "probe on the first N test samples");
  add_dataset_flags(sel, sel_data);
  sel->add_option("--out", sel_out, "JSON report path");
  sel->callback([&] {
    cmd_select(sel_ckpt, sel_data,
               sel_es->count() ? std::optional<double>(sel_p_es) : std::nullopt,
               sel_ed->count() ? std::optional<double>(sel_p_ed) : std::nullopt,
               sel_ds->count() ? std::optional<double>(sel_p_ds) : std::nullopt,
               sel_tolerance, sel_seed, sel_probe, sel_out);
  });

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("splitsim");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

}  // namespace splitsim::cli
