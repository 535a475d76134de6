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

// Single-precision inference: the layer kernels instantiated with float.

#include <span>
#include <vector>

#include "remnet/model/remnet.hpp"
#include "remnet/nn/tensor.hpp"

namespace remnet {

class Float32Model {
 public:
  Float32Model(const RemnetConfig& config, const ModelWeights& weights);

  float run(std::span<const float> cir) const;
  double run(std::span<const double> cir) const;

  const RemnetConfig& config() const { return config_; }

 private:
  RemnetConfig config_;
  std::vector<nn::TensorF> w_;
};

}  // namespace remnet
