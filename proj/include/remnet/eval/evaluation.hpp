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

// Error metrics, evaluation reports and the experiment drivers built on them.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "remnet/data/dataset.hpp"
#include "remnet/model/mlp.hpp"
#include "remnet/model/remnet.hpp"
#include "remnet/quant/qmodel.hpp"
#include "remnet/train/trainer.hpp"

namespace remnet::eval {

double mae(std::span<const double> preds, std::span<const double> targets);
// 1 - SSE / SST. Throws DataError ("undefined R²") for constant targets.
double r_squared(std::span<const double> preds, std::span<const double> targets);
// Population standard deviation.
double stddev(std::span<const double> values);

inline constexpr std::size_t kHistogramBins = 300;

// Fixed-width bins over [lo, hi). Values outside are clipped into the first
// or last bin and also counted in underflow / overflow.
struct Histogram {
  double lo = -1.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;

  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
  double bin_left(std::size_t i) const { return lo + bin_width() * static_cast<double>(i); }
  std::size_t total() const;
};

Histogram histogram(std::span<const double> values, std::size_t bins = kHistogramBins, double lo = -1.0,
                    double hi = 1.0);

// Residual = target - prediction. Raw statistics describe the targets
// themselves, i.e. the error of the unmitigated range. R² is NaN when the
// class has constant targets, every metric of an empty class is NaN.
struct EvalReport {
  std::size_t count_nlos = 0;
  std::size_t count_los = 0;
  double mae_nlos = 0.0;
  double mae_los = 0.0;
  double r2_nlos = 0.0;
  double r2_los = 0.0;
  double sigma_nlos = 0.0;
  double sigma_los = 0.0;  // not in the reference table; reported as an extra
  double raw_mae_nlos = 0.0;
  double raw_mae_los = 0.0;
  double raw_sigma_nlos = 0.0;
  double improvement_nlos = 0.0;  // (raw_mae - mae) / raw_mae
  double improvement_los = 0.0;
  double mae_all = 0.0;
  Histogram histogram;

  std::string to_json(int indent = 2) const;
  // key,value rows.
  void write_csv(std::ostream& out) const;
  // bin_left,count rows.
  void write_histogram_csv(std::ostream& out) const;
};

EvalReport report_from_predictions(std::span<const double> preds, std::span<const double> targets,
                                   const std::vector<bool>& los);

using Predictor = std::function<double(std::span<const double> input)>;

// Predictions are computed in parallel; aggregation sorts per-class values
// first, so the report does not depend on sample order or thread count.
EvalReport evaluate(const Predictor& predictor, const data::PreparedSet& set, std::size_t threads = 1);
EvalReport evaluate(const RemnetConfig& config, const ModelWeights& weights, const data::PreparedSet& set,
                    std::size_t threads = 1);
EvalReport evaluate(const quant::QuantizedModel& model, const data::PreparedSet& set, std::size_t threads = 1);

// Network input length for a window truncated to k: the next multiple of
// 2^modules at or above k (the tail is zero padded).
std::size_t padded_length(std::size_t k, std::uint32_t modules);

struct KSweepOptions {
  std::vector<std::size_t> k_values{8, 16, 32, 64, 128, 157};
  std::size_t repeats = 10;
  RemnetConfig base;  // input_length is overwritten per K
  TrainPlan plan;
  std::uint64_t seed = 1;
};

struct KSweepRow {
  std::size_t k = 0;
  std::size_t input_length = 0;
  std::vector<double> test_mae;  // one per repeat
  double mean_mae = 0.0;
  double std_mae = 0.0;
};

// Retrains the network once per (K, repeat) on windows truncated to K and
// reports the test MAE over all samples.
std::vector<KSweepRow> k_sweep(std::span<const data::CirSample> train, std::span<const data::CirSample> test,
                               const KSweepOptions& options);
void write_k_sweep_csv(std::ostream& out, const std::vector<KSweepRow>& rows);

enum class TransferAxis { environment, obstacle };

struct TransferOptions {
  TransferAxis axis = TransferAxis::environment;
  MlpConfig mlp;
  TrainPlan plan;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
};

struct TransferCell {
  double mae = 0.0;
  double raw_mae = 0.0;
  std::size_t test_count = 0;
};

// cells[s][t]: model trained on the training part of class s, tested on the
// held-out part of class t. Classes absent from the data are skipped.
struct TransferMatrix {
  TransferAxis axis = TransferAxis::environment;
  std::vector<std::string> classes;
  std::vector<std::vector<TransferCell>> cells;
};

TransferMatrix transfer_matrix(std::span<const data::CirSample> samples, const TransferOptions& options);
void write_transfer_csv(std::ostream& out, const TransferMatrix& matrix);

enum class Variant { float64, float32, int8 };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view text);

struct BenchResult {
  Variant variant = Variant::float32;
  std::size_t iterations = 0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double mean_ms = 0.0;
  std::size_t model_bytes = 0;
  double checksum = 0.0;  // sum of outputs, keeps the work observable
};

struct BenchOptions {
  std::size_t batch = 64;  // distinct inputs cycled through
  std::size_t warmup = 1000;
  std::size_t iterations = 10000;
  std::uint64_t seed = 1;
};

// Single-threaded wall-clock time per inference. model_bytes is the encoded
// size of the file that variant ships as (float checkpoint or REMQ).
BenchResult bench_latency(const quant::QuantizedModel& model, const ModelWeights& float_weights, Variant variant,
                          const BenchOptions& options = {});

}  // namespace remnet::eval
