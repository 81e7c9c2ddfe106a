// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "splitsim/error.hpp"
#include "splitsim/format.hpp"
#include "splitsim/rng.hpp"

namespace splitsim {

namespace {

constexpr const char* kCsvColumns[7] = {
    "temperature", "ph",       "conductivity", "dissolved_oxygen",
    "oxygen_saturation", "ammonium", "nitrite"};

bool is_leap(int year) {
  return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_month(int year, int month) {
  static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2 && is_leap(year)) return 29;
  return kDays[month - 1];
}

double seasonal_phase(int doy) {
  return 2.0 * std::numbers::pi * static_cast<double>(doy - 1) / 365.0;
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end && std::isfinite(out);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

bool is_valid_date(const CivilDate& d) {
  return d.month >= 1 && d.month <= 12 && d.day >= 1 &&
         d.day <= days_in_month(d.year, d.month);
}

int day_of_year(const CivilDate& d) {
  int doy = d.day;
  for (int m = 1; m < d.month; ++m) doy += days_in_month(d.year, m);
  return doy;
}

CivilDate next_day(const CivilDate& d) {
  CivilDate n = d;
  if (d.day < days_in_month(d.year, d.month)) {
    n.day += 1;
  } else if (d.month < 12) {
    n.month += 1;
    n.day = 1;
  } else {
    n.year += 1;
    n.month = 1;
    n.day = 1;
  }
  return n;
}

std::string to_iso(const CivilDate& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

bool parse_iso_date(const std::string& text, CivilDate& out) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  auto parse_int = [](const char* b, const char* e, int& v) {
    auto res = std::from_chars(b, e, v);
    return res.ec == std::errc() && res.ptr == e;
  };
  CivilDate d;
  const char* s = text.data();
  if (!parse_int(s, s + 4, d.year) || !parse_int(s + 5, s + 7, d.month) ||
      !parse_int(s + 8, s + 10, d.day)) {
    return false;
  }
  if (!is_valid_date(d)) return false;
  out = d;
  return true;
}

bool date_less(const CivilDate& a, const CivilDate& b) {
  if (a.year != b.year) return a.year < b.year;
  if (a.month != b.month) return a.month < b.month;
  return a.day < b.day;
}

double seasonal_temperature(int doy) {
  return 15.0 + 8.0 * std::sin(seasonal_phase(doy));
}

double seasonal_dissolved_oxygen(int doy) {
  // DO mean with temperature at its own seasonal mean: oxygen solubility
  // falls as the water warms.
  const double phase = seasonal_phase(doy);
  const double temp = seasonal_temperature(doy);
  return 8.0 + 2.0 * std::sin(phase + std::numbers::pi) - 0.15 * (temp - 15.0);
}

RawSeries generate_synthetic(std::uint64_t seed, std::size_t n_days,
                             CivilDate start) {
  if (n_days < 21) {
    throw ConfigError("generate_synthetic: need at least 21 days, got " +
                      std::to_string(n_days));
  }
  contract(is_valid_date(start), "generate_synthetic: invalid start date");

  // Seasonal sinusoid + AR(1) noise per column. phi/sigma per parameter:
  //   temperature        0.80 / 0.50
  //   dissolved oxygen   0.70 / 0.30   (also coupled to temperature, -0.15)
  //   ph                 0.60 / 0.05
  //   conductivity       0.85 / 8.0
  //   oxygen saturation  0.50 / 1.5    (coupled to DO, +9.0)
  //   ammonium           0.60 / 0.02   (coupled to DO, -0.02)
  //   nitrite            0.60 / 0.005
  Rng rng(seed);
  RawSeries series;
  series.dates.reserve(n_days);
  series.rows.reserve(n_days);

  double ar_temp = 0.0, ar_do = 0.0, ar_ph = 0.0, ar_cond = 0.0;
  double ar_sat = 0.0, ar_amm = 0.0, ar_nit = 0.0;
  CivilDate date = start;
  for (std::size_t t = 0; t < n_days; ++t) {
    const int doy = day_of_year(date);
    const double phase = seasonal_phase(doy);

    ar_temp = 0.80 * ar_temp + rng.normal(0.0, 0.50);
    ar_do = 0.70 * ar_do + rng.normal(0.0, 0.30);
    ar_ph = 0.60 * ar_ph + rng.normal(0.0, 0.05);
    ar_cond = 0.85 * ar_cond + rng.normal(0.0, 8.0);
    ar_sat = 0.50 * ar_sat + rng.normal(0.0, 1.5);
    ar_amm = 0.60 * ar_amm + rng.normal(0.0, 0.02);
    ar_nit = 0.60 * ar_nit + rng.normal(0.0, 0.005);

    std::array<double, kParameterCount> row{};
    row[kTemperature] = seasonal_temperature(doy) + ar_temp;
    row[kDissolvedOxygen] = 8.0 +
                            2.0 * std::sin(phase + std::numbers::pi) -
                            0.15 * (row[kTemperature] - 15.0) + ar_do;
    row[kPh] = 7.8 + 0.2 * std::sin(phase + 0.5) + ar_ph;
    row[kConductivity] = 400.0 + 35.0 * std::sin(phase + 2.0) + ar_cond;
    row[kOxygenSaturation] = 90.0 + 9.0 * (row[kDissolvedOxygen] - 8.0) + ar_sat;
    row[kAmmonium] = 0.3 - 0.02 * (row[kDissolvedOxygen] - 8.0) +
                     0.05 * std::sin(phase + 1.0) + ar_amm;
    row[kNitrite] = 0.05 + 0.01 * std::sin(phase + 2.5) + ar_nit;
    row[kSeasonalPhase] = std::sin(phase);

    series.dates.push_back(date);
    series.rows.push_back(row);
    date = next_day(date);
  }
  return series;
}

RawSeries ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("schema error: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header = split_csv_line(line);
  auto column_index = [&header](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };

  const int date_idx = column_index("date");
  if (date_idx < 0) throw ConfigError("schema error: missing column 'date'");
  int numeric_idx[7];
  for (int c = 0; c < 7; ++c) {
    numeric_idx[c] = column_index(kCsvColumns[c]);
    if (numeric_idx[c] < 0) {
      throw ConfigError(std::string("schema error: missing column '") +
                        kCsvColumns[c] + "'");
    }
  }

  RawSeries series;
  std::size_t row_no = 0;  // 1-based index of data rows
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row_no;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ConfigError("parse error at row " + std::to_string(row_no) +
                        ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    }
    CivilDate date;
    if (!parse_iso_date(fields[date_idx], date)) {
      throw ConfigError("parse error at row " + std::to_string(row_no) +
                        ": invalid date '" + fields[date_idx] + "'");
    }
    if (!series.dates.empty() && !date_less(series.dates.back(), date)) {
      throw ConfigError("parse error at row " + std::to_string(row_no) +
                        ": dates must be strictly chronological");
    }
    std::array<double, kParameterCount> row{};
    for (int c = 0; c < 7; ++c) {
      double v;
      if (!parse_double(fields[numeric_idx[c]], v)) {
        throw ConfigError("parse error at row " + std::to_string(row_no) +
                          ", column '" + kCsvColumns[c] + "': cannot parse '" +
                          fields[numeric_idx[c]] + "'");
      }
      row[c] = v;
    }
    row[kSeasonalPhase] = std::sin(seasonal_phase(day_of_year(date)));
    series.dates.push_back(date);
    series.rows.push_back(row);
  }
  return series;
}

void write_csv(const RawSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "date";
  for (const char* name : kCsvColumns) out << ',' << name;
  out << '\n';
  for (std::size_t r = 0; r < series.days(); ++r) {
    out << to_iso(series.dates[r]);
    for (int c = 0; c < 7; ++c) out << ',' << fmt_double(series.rows[r][c]);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<Sample> make_windows(const RawSeries& series, std::size_t lookback) {
  if (series.days() <= lookback) {
    throw ConfigError("make_windows: series has " +
                      std::to_string(series.days()) +
                      " days, need more than " + std::to_string(lookback));
  }
  const std::size_t n_cov = kParameterCount - 1;  // everything but DO
  std::vector<Sample> samples;
  samples.reserve(series.days() - lookback);
  for (std::size_t t = lookback; t < series.days(); ++t) {
    Sample s;
    s.features.reserve(lookback + n_cov);
    for (std::size_t k = 0; k < lookback; ++k) {
      s.features.push_back(series.rows[t - lookback + k][kDissolvedOxygen]);
    }
    for (std::size_t c = 0; c < kParameterCount; ++c) {
      if (c == kDissolvedOxygen) continue;
      s.features.push_back(series.rows[t][c]);
    }
    s.label = series.rows[t][kDissolvedOxygen];
    samples.push_back(std::move(s));
  }
  return samples;
}

NormStats fit_normalizer(const std::vector<Sample>& samples) {
  if (samples.empty()) throw ConfigError("fit_normalizer: empty fitting split");
  const std::size_t width = samples[0].features.size();
  NormStats stats;
  stats.features.assign(width, {samples[0].features[0], samples[0].features[0]});
  for (std::size_t c = 0; c < width; ++c) {
    stats.features[c] = {samples[0].features[c], samples[0].features[c]};
  }
  stats.label = {samples[0].label, samples[0].label};
  for (const Sample& s : samples) {
    contract(s.features.size() == width, "fit_normalizer: ragged feature widths");
    for (std::size_t c = 0; c < width; ++c) {
      stats.features[c].min = std::min(stats.features[c].min, s.features[c]);
      stats.features[c].max = std::max(stats.features[c].max, s.features[c]);
    }
    stats.label.min = std::min(stats.label.min, s.label);
    stats.label.max = std::max(stats.label.max, s.label);
  }
  for (std::size_t c = 0; c < width; ++c) {
    if (!(stats.features[c].max > stats.features[c].min)) {
      throw ConfigError("fit_normalizer: degenerate feature column " +
                        std::to_string(c) + " (max == min)");
    }
  }
  if (!(stats.label.max > stats.label.min)) {
    throw ConfigError("fit_normalizer: degenerate label column (max == min)");
  }
  return stats;
}

namespace {

double affine_to_unit(double v, const NormStats::MinMax& mm) {
  return 2.0 * (v - mm.min) / (mm.max - mm.min) - 1.0;
}

}  // namespace

std::vector<Sample> apply_normalizer(const NormStats& stats,
                                     const std::vector<Sample>& samples) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    contract(s.features.size() == stats.features.size(),
             "apply_normalizer: feature width " +
                 std::to_string(s.features.size()) + " vs stats width " +
                 std::to_string(stats.features.size()));
    Sample n;
    n.features.resize(s.features.size());
    for (std::size_t c = 0; c < s.features.size(); ++c) {
      n.features[c] = affine_to_unit(s.features[c], stats.features[c]);
    }
    n.label = affine_to_unit(s.label, stats.label);
    out.push_back(std::move(n));
  }
  return out;
}

double normalize_label(const NormStats& stats, double label) {
  return affine_to_unit(label, stats.label);
}

double denormalize_label(const NormStats& stats, double normalized) {
  return (normalized + 1.0) * 0.5 * (stats.label.max - stats.label.min) +
         stats.label.min;
}

SplitData chrono_split(const std::vector<Sample>& samples,
                       double train_fraction) {
  if (samples.size() < 2) {
    throw ConfigError("chrono_split: need at least 2 samples, got " +
                      std::to_string(samples.size()));
  }
  // Epsilon guards against binary representations like 0.7 rounding
  // floor(10 * 0.7) down to 6.
  const auto train_n = static_cast<std::size_t>(std::floor(
      static_cast<double>(samples.size()) * train_fraction + 1e-9));
  SplitData split;
  split.train.assign(samples.begin(), samples.begin() + train_n);
  split.test.assign(samples.begin() + train_n, samples.end());
  return split;
}

}  // namespace splitsim
