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

// Plain multilayer perceptron on the raw CIR, used as a baseline and for the
// environment/material transfer experiments.

#include <cstdint>
#include <span>
#include <vector>

#include "remnet/model/remnet.hpp"
#include "remnet/model/weights.hpp"
#include "remnet/rng.hpp"

namespace remnet {

struct MlpConfig {
  std::uint32_t input_dim = 157;
  std::uint32_t hidden = 64;
  std::uint32_t layers = 3;  // dense layers in total, the last one is the linear output

  void validate() const;
};

std::size_t mlp_parameter_count(const MlpConfig& config);

ModelWeights mlp_build(const MlpConfig& config, Rng& rng);

struct MlpTrace {
  std::vector<std::vector<double>> inputs;  // input of every dense layer
  std::vector<std::vector<double>> pre;     // pre-activation of every dense layer
};

double mlp_forward(const MlpConfig& config, const ModelWeights& weights, std::span<const double> x,
                   MlpTrace* trace = nullptr);

void mlp_backward_from_trace(const MlpConfig& config, const ModelWeights& weights, const MlpTrace& trace,
                             double grad_prediction, ModelWeights& grads);

// Mean absolute error over the batch and its gradient.
LossAndGrads mlp_backward(const MlpConfig& config, const ModelWeights& weights, std::span<const Example> batch);

}  // namespace remnet
