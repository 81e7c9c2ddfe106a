// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "splitsim/numeric.hpp"

namespace splitsim {

// ---------------------------------------------------------------------------
// Calendar plumbing. Dates are proleptic Gregorian; day_of_year is 1-based.
// ---------------------------------------------------------------------------

struct CivilDate {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  bool operator==(const CivilDate&) const = default;
};

bool is_valid_date(const CivilDate& d);
int day_of_year(const CivilDate& d);
CivilDate next_day(const CivilDate& d);
std::string to_iso(const CivilDate& d);
/// Strict YYYY-MM-DD; returns false on malformed or out-of-range input.
bool parse_iso_date(const std::string& text, CivilDate& out);
/// True when a < b chronologically.
bool date_less(const CivilDate& a, const CivilDate& b);

// ---------------------------------------------------------------------------
// Raw series. Column order matches the CSV schema; the eighth parameter is
// the seasonal phase sin(2*pi*(doy-1)/365), derived from the date column so
// the CSV round-trips losslessly.
// ---------------------------------------------------------------------------

enum SeriesColumn : std::size_t {
  kTemperature = 0,
  kPh = 1,
  kConductivity = 2,
  kDissolvedOxygen = 3,
  kOxygenSaturation = 4,
  kAmmonium = 5,
  kNitrite = 6,
  kSeasonalPhase = 7,  // auxiliary parameter, derived from the date
  kParameterCount = 8
};

struct RawSeries {
  std::vector<CivilDate> dates;
  std::vector<std::array<double, kParameterCount>> rows;

  std::size_t days() const { return rows.size(); }
};

/// Deterministic seasonal means of the generator (noise-free components).
double seasonal_temperature(int doy);
double seasonal_dissolved_oxygen(int doy);

/// Seasonal + AR(1) synthetic water-quality series; deterministic given seed.
/// Requires n_days >= 21 (one sliding window plus label).
RawSeries generate_synthetic(std::uint64_t seed, std::size_t n_days,
                             CivilDate start = CivilDate{2013, 11, 1});

/// Schema: date,temperature,ph,conductivity,dissolved_oxygen,
/// oxygen_saturation,ammonium,nitrite. Header required; columns may appear
/// in any order; rows must be chronological.
RawSeries ingest_csv(const std::string& path);
void write_csv(const RawSeries& series, const std::string& path);

// ---------------------------------------------------------------------------
// Windowing, normalization, splitting.
// ---------------------------------------------------------------------------

struct Sample {
  Vector features;  // lookback lagged DO values + current-day covariates
  double label = 0.0;  // current-day dissolved oxygen
};

/// One sample per day t in [lookback, days): features are
/// [DO_{t-lookback}..DO_{t-1}, other7_t], label DO_t.
std::vector<Sample> make_windows(const RawSeries& series,
                                 std::size_t lookback = 20);

struct NormStats {
  struct MinMax {
    double min = 0.0;
    double max = 0.0;
  };
  std::vector<MinMax> features;
  MinMax label;
};

/// Min/max per feature column and label, fitted on the given (training)
/// samples only. Degenerate columns (max == min) are rejected.
NormStats fit_normalizer(const std::vector<Sample>& samples);

/// v' = 2 (v - min) / (max - min) - 1. Out-of-range values (possible on the
/// test split) are mapped by the same affine rule, never clipped.
std::vector<Sample> apply_normalizer(const NormStats& stats,
                                     const std::vector<Sample>& samples);

double normalize_label(const NormStats& stats, double label);
double denormalize_label(const NormStats& stats, double normalized);

struct SplitData {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// First floor(train_fraction * n) samples go to train, rest to test;
/// chronological order preserved, no shuffling.
SplitData chrono_split(const std::vector<Sample>& samples,
                       double train_fraction = 0.7);

}  // namespace splitsim
