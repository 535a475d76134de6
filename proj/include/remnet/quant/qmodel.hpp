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

// Integer-only deployment form of a trained network.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "remnet/model/remnet.hpp"
#include "remnet/quant/fixed_point.hpp"
#include "remnet/quant/quantize.hpp"

namespace remnet::quant {

// Residual and branch sums rescale both operands onto a common grid with
// this many extra fractional bits before adding.
inline constexpr int kAddLeftShift = 12;

// Every requantization multiplier is kept strictly below this bound by
// raising the output scale when calibration ranges are too narrow.
inline constexpr double kMaxMultiplier = 1.0 - 1.0 / (1 << 20);

// Order of requantization multipliers: the stem, then kPerModule per module.
namespace mult {
inline constexpr std::size_t kStem = 0;
inline constexpr std::size_t kPerModule = 13;
enum ModuleSlot : std::size_t {
  body,
  gap,
  se1,
  se2,
  mul,
  res_x,
  res_e,
  res_out,
  br1,
  br2,
  sum_a,
  sum_b,
  sum_out,
};
inline constexpr std::size_t module(std::size_t i, ModuleSlot slot) { return 1 + kPerModule * i + slot; }
inline constexpr std::size_t count(std::size_t modules) { return 1 + kPerModule * modules; }
}  // namespace mult

struct QTensor {
  std::string name;
  std::vector<std::size_t> shape;
  QuantParams params;
  bool wide = false;              // int32 payload (biases) instead of int8
  std::vector<std::int8_t> q8;
  std::vector<std::int32_t> q32;

  std::size_t size() const { return wide ? q32.size() : q8.size(); }
  std::int32_t at(std::size_t i) const { return wide ? q32[i] : q8[i]; }
  bool operator==(const QTensor&) const = default;
};

using SigmoidTable = std::array<std::int8_t, 256>;

struct QuantizedModel {
  RemnetConfig config;
  std::vector<QTensor> tensors;           // same order as the float weights
  std::vector<QuantParams> activations;   // one per activation point
  std::vector<FixedPointMultiplier> multipliers;
  // Derived from `activations` by rebuild_tables(); not serialized.
  std::vector<SigmoidTable> sigmoid_tables;

  void rebuild_tables();
  // Checks sizes, parameter validity and that no int32 accumulator can overflow.
  void validate() const;
  // Weights recovered by dequantization.
  ModelWeights dequantized_weights() const;

  bool operator==(const QuantizedModel& other) const {
    return config == other.config && tensors == other.tensors && activations == other.activations &&
           multipliers == other.multipliers;
  }
};

// Observed [min, max] of one activation point.
struct Range {
  double min = 0.0;
  double max = 0.0;
  bool seen = false;

  void observe(std::span<const double> values);
  void merge(const Range& other);
};

// Activation quantization parameters for every point, including the scale
// floors that keep each requantization multiplier below kMaxMultiplier.
std::vector<QuantParams> derive_activation_params(const RemnetConfig& config, const ModelWeights& weights,
                                                  std::span<const Range> ranges);

// Quantizes weights and biases and computes all multipliers.
QuantizedModel export_quantized(const RemnetConfig& config, const ModelWeights& weights,
                                std::span<const Range> ranges);

// Post-training quantization: min/max ranges from inference-mode forwards
// over the calibration inputs.
std::vector<Range> collect_ranges(const RemnetConfig& config, const ModelWeights& weights,
                                  std::span<const std::span<const double>> calibration);
QuantizedModel calibrate_ptq(const RemnetConfig& config, const ModelWeights& weights,
                             std::span<const std::span<const double>> calibration);

// Binary file "REMQ"; layout in docs/formats.md.
std::vector<std::uint8_t> encode_quantized(const QuantizedModel& model);
QuantizedModel decode_quantized(const std::vector<std::uint8_t>& bytes);
void save_quantized(const std::filesystem::path& path, const QuantizedModel& model);
QuantizedModel load_quantized(const std::filesystem::path& path);

}  // namespace remnet::quant
