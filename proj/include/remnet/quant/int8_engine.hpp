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

// Integer-only inference. Every layer consumes int8 activations, accumulates
// in int32 and requantizes with a fixed-point multiplier. The only floating
// point operation is the conversion of the head accumulator to meters.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "remnet/quant/qmodel.hpp"

namespace remnet::quant {

// int8 tensor at every activation point, indexed like activation_point_names().
struct Int8Trace {
  std::vector<std::vector<std::int8_t>> points;
  std::int32_t head_accumulator = 0;
};

std::vector<std::int8_t> quantize_input(const QuantizedModel& model, std::span<const double> cir);

// Lifted and rescaled operand of a residual or branch sum, per int8 value.
using AddTable = std::array<std::int32_t, 256>;

// Reusable workspace for repeated inference with one model. Not thread-safe;
// use one engine per thread.
class Int8Engine {
 public:
  explicit Int8Engine(const QuantizedModel& model);

  double run(std::span<const std::int8_t> input, Int8Trace* trace = nullptr);
  const QuantizedModel& model() const { return model_; }

 private:
  const QuantizedModel& model_;
  // Conv weights as int16 tap pairs: (ceil(kernel * in / 2) x out x 2).
  std::vector<std::vector<std::int16_t>> paired_;
  // Per module: residual input, residual branch, branch 1, branch 2.
  std::vector<std::array<AddTable, 4>> add_tables_;
  std::vector<std::int8_t> a_, f_, e_, u_, b1_, b2_;
  std::vector<std::int8_t> g_, h_, z_, s_;
  std::vector<std::int16_t> padded_;
  std::vector<std::int32_t> acc_;
};

double forward_int8(const QuantizedModel& model, std::span<const std::int8_t> input, Int8Trace* trace = nullptr);

// quantize_input followed by forward_int8.
double predict_int8(const QuantizedModel& model, std::span<const double> cir);

}  // namespace remnet::quant
