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

#include "remnet/model/mlp.hpp"

#include <cmath>

#include "remnet/nn/layers.hpp"

namespace remnet {

void MlpConfig::validate() const {
  if (input_dim == 0) raise<ConfigError>("mlp: input_dim must be positive");
  if (hidden == 0) raise<ConfigError>("mlp: hidden must be positive");
  if (layers == 0) raise<ConfigError>("mlp: layers must be at least 1");
}

std::size_t mlp_parameter_count(const MlpConfig& c) {
  c.validate();
  if (c.layers == 1) return c.input_dim + 1;
  std::size_t n = (c.input_dim + 1) * c.hidden;
  n += (c.layers - 2) * (c.hidden + 1) * c.hidden;
  n += c.hidden + 1;
  return n;
}

ModelWeights mlp_build(const MlpConfig& c, Rng& rng) {
  c.validate();
  ModelWeights m;
  std::size_t in = c.input_dim;
  for (std::uint32_t l = 0; l < c.layers; ++l) {
    const std::size_t out = (l + 1 == c.layers) ? 1 : c.hidden;
    const std::string p = (l + 1 == c.layers) ? std::string("out") : "fc" + std::to_string(l);
    auto& w = m.add(p + ".w", {in, out});
    m.add(p + ".b", {out});
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (auto& v : w.storage()) v = rng.uniform(-limit, limit);
    in = out;
  }
  return m;
}

double mlp_forward(const MlpConfig& c, const ModelWeights& w, std::span<const double> x, MlpTrace* trace) {
  if (x.size() != c.input_dim) raise<ShapeError>("mlp_forward: input length ", x.size(), " != ", c.input_dim);
  check_finite<double>(x, "mlp_forward(input)");
  MlpTrace local;
  MlpTrace& tr = trace ? *trace : local;
  tr.inputs.assign(c.layers, {});
  tr.pre.assign(c.layers, {});
  std::vector<double> a(x.begin(), x.end());
  for (std::uint32_t l = 0; l < c.layers; ++l) {
    tr.inputs[l] = a;
    tr.pre[l] = nn::dense_forward<double>(a, w[2 * l], w[2 * l + 1].values(), nn::Activation::linear);
    a = (l + 1 == c.layers) ? tr.pre[l] : nn::relu_forward<double>(tr.pre[l]);
  }
  return a[0];
}

void mlp_backward_from_trace(const MlpConfig& c, const ModelWeights& w, const MlpTrace& tr, double gp,
                             ModelWeights& grads) {
  std::vector<double> g{gp};
  for (std::uint32_t l = c.layers; l-- > 0;) {
    if (l + 1 != c.layers) g = nn::relu_backward<double>(g, tr.pre[l]);
    auto d = nn::dense_backward<double>(g, tr.inputs[l], w[2 * l], tr.pre[l], nn::Activation::linear);
    auto gw = grads[2 * l].values();
    for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += d.weights[i];
    auto gb = grads[2 * l + 1].values();
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += d.bias[i];
    g = std::move(d.input);
  }
}

LossAndGrads mlp_backward(const MlpConfig& c, const ModelWeights& w, std::span<const Example> batch) {
  if (batch.empty()) raise<DataError>("mlp_backward: empty batch");
  LossAndGrads out{0.0, w.zeros_like()};
  const double inv = 1.0 / static_cast<double>(batch.size());
  MlpTrace trace;
  for (const auto& ex : batch) {
    const double err = mlp_forward(c, w, ex.input, &trace) - ex.target;
    out.loss += std::abs(err);
    mlp_backward_from_trace(c, w, trace, abs_subgradient(err) * inv, out.grads);
  }
  out.loss *= inv;
  return out;
}

}  // namespace remnet
