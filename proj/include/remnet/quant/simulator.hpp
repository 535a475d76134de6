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

// Floating-point reference for the integer engine.
//
// Runs the double-precision layer kernels on dequantized weights and
// activations. At each point where the integer engine requantizes, the real
// accumulator is mapped back to its integer grid and the fixed-point
// multiplier is applied with exact double arithmetic, so every activation
// lands on the same grid point as in forward_int8.

#include <cstdint>
#include <span>
#include <vector>

#include "remnet/quant/qmodel.hpp"

namespace remnet::quant {

// Real values at every activation point.
struct SimTrace {
  std::vector<std::vector<double>> points;
};

// round(acc * M) with the two rounding steps of fixed_point_mul, evaluated in
// double. Throws if |acc * m0| is not exactly representable.
double emulate_fixed_point_mul(double acc, const FixedPointMultiplier& m);

double simulate_quantized(const QuantizedModel& model, std::span<const double> cir, SimTrace* trace = nullptr);

}  // namespace remnet::quant
