// Copyright 2026 The REMNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// UWB channel impulse response samples: import, windowing, normalization,
// splits and truncation.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "remnet/model/remnet.hpp"

namespace remnet::data {

inline constexpr std::size_t kPrePeak = 5;
inline constexpr std::size_t kPostPeak = 152;
inline constexpr std::size_t kWindowLength = kPrePeak + kPostPeak;  // 157
inline constexpr double kDefaultPeakFraction = 0.4;
// Samples with |measured - true| at or above this are treated as outliers.
inline constexpr double kLabelBound = 10.0;

enum class Environment { big_room, medium_room, small_room, outdoor, ttw };
enum class Obstacle { none, aluminium, plastic, wood, glass, other };

inline constexpr Environment kEnvironments[] = {Environment::big_room, Environment::medium_room,
                                               Environment::small_room, Environment::outdoor, Environment::ttw};
inline constexpr Obstacle kObstacles[] = {Obstacle::none, Obstacle::aluminium, Obstacle::plastic,
                                          Obstacle::wood, Obstacle::glass, Obstacle::other};

std::string_view to_string(Environment env);
std::string_view to_string(Obstacle obstacle);
// Case-insensitive; throws DataError for unknown names.
Environment parse_environment(std::string_view text);
Obstacle parse_obstacle(std::string_view text);

struct CirSample {
  std::vector<double> cir;      // kWindowLength amplitudes
  double measured_range = 0.0;  // d_hat, meters
  double true_range = 0.0;      // d, meters
  Environment environment = Environment::big_room;
  Obstacle obstacle = Obstacle::none;
  bool los = true;

  // Range error d_hat - d; the network's regression target.
  double label() const { return measured_range - true_range; }
};

// Throws DataError describing the first violated invariant.
void validate_sample(const CirSample& sample);

// Window anchored at the first index whose amplitude reaches
// `peak_fraction` of the trace maximum: raw[i - 5 .. i + 151], zero-padded.
std::vector<double> window_cir(std::span<const double> raw, double peak_fraction = kDefaultPeakFraction);
std::size_t first_peak_index(std::span<const double> raw, double peak_fraction = kDefaultPeakFraction);

// Scales the CIR so its largest magnitude is 1.
CirSample normalize(CirSample sample);
std::vector<double> normalize_max_abs(std::span<const double> cir);

// First k entries of the window.
std::vector<double> truncate_to_k(std::span<const double> cir, std::size_t k);

// --- CSV import ---------------------------------------------------------

struct ColumnMap {
  std::string measured_range = "d_meas";
  std::string true_range = "d_true";
  std::string environment = "env";
  std::string obstacle = "obstacle";
  std::string los = "los";
  std::string cir_prefix = "cir_";
  // CIR columns are taken as a pre-windowed 157-vector when exactly that many
  // are present and this is false; otherwise they are a raw trace to window.
  bool force_raw = false;
  double peak_fraction = kDefaultPeakFraction;
  bool normalize = true;
};

struct RowError {
  std::size_t row = 0;  // 1-based line number in the file, header is line 1
  std::string message;
};

struct ImportResult {
  std::vector<CirSample> samples;
  std::vector<RowError> errors;
  std::size_t rows_read = 0;

  // Human-readable summary plus one line per rejected row.
  std::string report() const;
};

// Missing columns or an unreadable file throw DataError; malformed rows are
// collected into `errors`.
ImportResult import_csv(std::istream& in, const ColumnMap& columns = {});
ImportResult import_csv(const std::filesystem::path& path, const ColumnMap& columns = {});

// Canonical schema: d_meas,d_true,env,obstacle,los,cir_0..cir_156.
void write_csv(std::ostream& out, std::span<const CirSample> samples);
void write_csv(const std::filesystem::path& path, std::span<const CirSample> samples);

// --- splits ---------------------------------------------------------------

struct SplitPolicy {
  enum class Kind { paper_default, by_environment, by_obstacle, stratified };
  Kind kind = Kind::paper_default;
  Environment environment = Environment::big_room;
  Obstacle obstacle = Obstacle::none;
  double fraction = 0.8;
  std::uint64_t seed = 0;

  // Train on big and small rooms, test on the medium room; outdoor and
  // through-the-wall samples are left out of both.
  static SplitPolicy paper_default() { return {}; }
  // Train on one environment (or obstacle), test on everything else.
  static SplitPolicy by_environment(Environment env);
  static SplitPolicy by_obstacle(Obstacle obstacle);
  // Per (environment, obstacle) stratum, a seeded shuffle puts `fraction` in train.
  static SplitPolicy stratified(double fraction, std::uint64_t seed);

  std::string describe() const;
};

struct DatasetSplit {
  std::vector<CirSample> train;
  std::vector<CirSample> test;
  std::string policy;
};

DatasetSplit split(std::span<const CirSample> samples, const SplitPolicy& policy);

std::vector<CirSample> filter_environment(std::span<const CirSample> samples, Environment env);

// --- model inputs -------------------------------------------------------

// Network inputs truncated to k samples and zero-padded to `input_length`
// (>= k), with targets; owns the storage that Example spans point into.
struct PreparedSet {
  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;
  std::vector<bool> los;

  std::size_t size() const { return inputs.size(); }
  std::vector<Example> examples() const;
  std::vector<std::span<const double>> input_spans() const;
};

PreparedSet prepare(std::span<const CirSample> samples, std::size_t k, std::size_t input_length);

// `count` distinct indices drawn with a seeded shuffle (all of them if fewer).
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count, std::uint64_t seed);

}  // namespace remnet::data
