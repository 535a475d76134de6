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

// Affine per-tensor quantization r = S (q - Z).
//
// Activations: int8 storage, zero point free in [-128, 127].
// Weights:     int8 symmetric, q in [-127, 127], Z = 0.
// Biases:      int32, Z = 0, S = S_input * S_weight.

#include <cstdint>
#include <span>
#include <vector>

#include "remnet/nn/tensor.hpp"

namespace remnet::quant {

// Scales never go below this, so constant-zero tensors stay well defined.
inline constexpr double kScaleFloor = 1e-8;

struct QuantParams {
  double scale = 1.0;
  std::int32_t zero_point = 0;
  std::int32_t qmin = -128;
  std::int32_t qmax = 127;

  void validate() const;
  // Real interval representable without clamping.
  double real_min() const { return scale * static_cast<double>(qmin - zero_point); }
  double real_max() const { return scale * static_cast<double>(qmax - zero_point); }
  bool operator==(const QuantParams&) const = default;
};

// Range is widened to include 0 so that real zero is exactly representable.
// `min_scale` raises the scale when the observed range is narrower.
QuantParams activation_params(double min, double max, double min_scale = kScaleFloor);
QuantParams weight_params(double max_abs);
QuantParams bias_params(double scale);
// Fixed output grid of the SE sigmoid gate: S = 1/256, Z = -128.
QuantParams gate_params();

// q = clamp(round_half_away(r / S) + Z, qmin, qmax)
std::int32_t quantize(double r, const QuantParams& p);
// S * (q - Z)
double dequantize(std::int32_t q, const QuantParams& p);

inline double fake_quant(double x, const QuantParams& p) { return dequantize(quantize(x, p), p); }

nn::Tensor fake_quant(const nn::Tensor& x, const QuantParams& p);

// Straight-through estimator: the upstream gradient passes where x lies in
// the representable interval and is zeroed where quantization clamped.
std::vector<double> fake_quant_backward(std::span<const double> grad_out, std::span<const double> x,
                                        const QuantParams& p);

double max_abs(std::span<const double> values);

}  // namespace remnet::quant
