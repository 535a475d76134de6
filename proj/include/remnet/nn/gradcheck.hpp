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

#include <cstdint>

#include "remnet/nn/layers.hpp"
#include "remnet/nn/tensor.hpp"

namespace remnet::nn {

enum class LayerKind { conv1d, dense, gap, relu, sigmoid, dropout, add, flatten };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  Activation activation = Activation::linear;  // dense only
  double dropout_rate = 0.0;                    // dropout only, mask fixed per check
};

// Magnitudes below this are compared on an absolute scale.
inline constexpr double kGradCheckFloor = 1e-3;

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

/// Compares the analytic backward pass of one layer against central finite
/// differences over every input element and every parameter.
///
/// Parameters (and the second operand of `add`) are drawn uniformly from
/// [-1, 1) using `seed`; the scalar objective is a fixed random projection of
/// the layer output. Coordinates whose perturbation flips a ReLU are
/// evaluated one-sided. Throws NonFiniteError on non-finite values.
double gradient_check(const LayerSpec& layer, const Tensor& input, double epsilon, std::uint64_t seed = 0);

}  // namespace remnet::nn
