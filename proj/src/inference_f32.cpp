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

#include "remnet/model/inference_f32.hpp"

#include "remnet/nn/layers.hpp"

namespace remnet {

using nn::Activation;
using nn::TensorF;

Float32Model::Float32Model(const RemnetConfig& config, const ModelWeights& weights) : config_(config) {
  config_.validate();
  if (!weights.same_layout(remnet_layout(config_))) raise<ShapeError>("Float32Model: weights do not match config");
  w_.reserve(weights.tensor_count());
  for (std::size_t i = 0; i < weights.tensor_count(); ++i) w_.push_back(weights[i].cast<float>());
}

double Float32Model::run(std::span<const double> cir) const {
  std::vector<float> x(cir.begin(), cir.end());
  return static_cast<double>(run(std::span<const float>(x)));
}

float Float32Model::run(std::span<const float> cir) const {
  const std::size_t k_in = config_.input_length;
  const std::size_t fch = config_.filters;
  if (cir.size() != k_in) raise<ShapeError>("Float32Model: input length ", cir.size(), " != K=", k_in);
  auto relu = [](TensorF t) {
    for (float& v : t.storage()) v = v > 0.0f ? v : 0.0f;
    return t;
  };

  TensorF x({k_in, 1}, std::vector<float>(cir.begin(), cir.end()));
  TensorF a = relu(nn::conv1d_forward<float>(x, w_[param::kStemW], w_[param::kStemB].values(), 1));
  for (std::size_t i = 0; i < config_.modules; ++i) {
    auto w = [&](param::ModuleSlot s) -> const TensorF& { return w_[param::module(i, s)]; };
    const TensorF f = relu(nn::conv1d_forward<float>(a, w(param::body_w), w(param::body_b).values(), 1));
    const auto g = nn::global_avg_pool(f);
    const auto h = nn::dense_forward<float>(g, w(param::se1_w), w(param::se1_b).values(), Activation::relu);
    const auto z = nn::dense_forward<float>(h, w(param::se2_w), w(param::se2_b).values(), Activation::linear);
    const auto s = nn::sigmoid_forward<float>(z);
    const std::size_t len = f.dim(0);
    TensorF u = a;
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t c = 0; c < fch; ++c) u(t, c) += f(t, c) * s[c];
    }
    TensorF b1 = relu(nn::conv1d_forward<float>(u, w(param::br1_w), w(param::br1_b).values(), 2));
    const TensorF b2 = relu(nn::conv1d_forward<float>(u, w(param::br2_w), w(param::br2_b).values(), 2));
    for (std::size_t k = 0; k < b1.size(); ++k) b1[k] += b2[k];
    a = std::move(b1);
  }
  const auto out = nn::dense_forward<float>(a.values(), w_[param::head_w(config_.modules)],
                                            w_[param::head_b(config_.modules)].values(), Activation::linear);
  return out[0];
}

}  // namespace remnet
