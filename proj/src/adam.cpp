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

#include "remnet/train/adam.hpp"

#include <cmath>

#include "remnet/common.hpp"

namespace remnet {

AdamState AdamState::for_weights(const ModelWeights& weights, AdamOptions options) {
  return AdamState{weights.zeros_like(), weights.zeros_like(), 0, options};
}

void adam_step(AdamState& state, ModelWeights& weights, const ModelWeights& grads) {
  if (!weights.same_layout(grads) || !weights.same_layout(state.m)) {
    raise<ShapeError>("adam_step: weights, grads and state layouts differ");
  }
  for (std::size_t i = 0; i < grads.tensor_count(); ++i) {
    for (double g : grads[i].values()) {
      if (!std::isfinite(g)) raise<NonFiniteError>("adam_step: non-finite gradient in '", grads.name(i), "'");
    }
  }
  const auto& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < weights.tensor_count(); ++i) {
    auto w = weights[i].values();
    auto g = grads[i].values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

}  // namespace remnet
