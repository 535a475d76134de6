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

// The range-error mitigation network.
//
//   conv1d(first_kernel, 1 -> F) + ReLU
//   N x residual reduction module:
//       f = ReLU(conv1d(body_kernel, F -> F))
//       s = sigmoid(dense(ReLU(dense(GAP(f), F -> F/r)), F/r -> F))
//       u = x + f * s                                  (residual unit)
//       out = ReLU(conv1d_s2(body_kernel, u)) + ReLU(conv1d_s2(branch2_kernel, u))
//   flatten -> dropout -> dense(K/2^N * F -> 1, linear)
//
// All convolutions use `same` zero padding, so module i halves the temporal
// length: K -> K/2 -> ... -> K/2^N.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "remnet/model/weights.hpp"
#include "remnet/nn/tensor.hpp"
#include "remnet/rng.hpp"

namespace remnet {

struct RemnetConfig {
  std::uint32_t input_length = 128;  // K
  std::uint32_t filters = 16;        // F
  std::uint32_t modules = 3;         // N
  std::uint32_t se_reduction = 8;    // r
  std::uint32_t first_kernel = 7;
  std::uint32_t body_kernel = 3;
  std::uint32_t branch2_kernel = 1;
  double dropout_rate = 0.2;

  // Throws ConfigError naming the violated constraint.
  void validate() const;

  std::size_t se_width() const { return filters / se_reduction; }
  // Temporal length at the input of module i (i == modules gives the head).
  std::size_t length_at(std::size_t module) const { return input_length >> module; }
  std::size_t head_inputs() const { return length_at(modules) * filters; }

  bool operator==(const RemnetConfig&) const = default;
};

// Closed-form trainable parameter count.
std::size_t parameter_count(const RemnetConfig& config);

// Index of each tensor in ModelWeights. Per module the order is
// body.w, body.b, se1.w, se1.b, se2.w, se2.b, br1.w, br1.b, br2.w, br2.b.
namespace param {
inline constexpr std::size_t kStemW = 0;
inline constexpr std::size_t kStemB = 1;
inline constexpr std::size_t kPerModule = 10;
enum ModuleSlot : std::size_t { body_w, body_b, se1_w, se1_b, se2_w, se2_b, br1_w, br1_b, br2_w, br2_b };
inline constexpr std::size_t module(std::size_t i, ModuleSlot slot) { return 2 + kPerModule * i + slot; }
inline constexpr std::size_t head_w(std::size_t modules) { return 2 + kPerModule * modules; }
inline constexpr std::size_t head_b(std::size_t modules) { return head_w(modules) + 1; }
}  // namespace param

// Zero-valued weights with the config's names and shapes.
ModelWeights remnet_layout(const RemnetConfig& config);

// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out)), conv fans
// include the kernel size), zero biases. Tensors are filled in layout order.
ModelWeights build(const RemnetConfig& config, Rng& rng);

enum class Mode { train, infer };

// Named points where activations are observed (calibration) or rewritten
// (fake quantization). Point 0 is the network input, point 1 the stem output,
// then kPointsPerModule points per residual reduction module.
namespace point {
inline constexpr std::size_t kInput = 0;
inline constexpr std::size_t kStem = 1;
inline constexpr std::size_t kPerModule = 10;
enum ModuleSlot : std::size_t { body, gap, se1, se2, gate, scaled, residual, br1, br2, out };
inline constexpr std::size_t module(std::size_t i, ModuleSlot slot) { return 2 + kPerModule * i + slot; }
}  // namespace point

std::size_t activation_point_count(const RemnetConfig& config);
std::vector<std::string> activation_point_names(const RemnetConfig& config);

// Hook invoked on every activation point during forward. It may rewrite
// values in place; `pass` may be filled with a 0/1 mask that gates the
// gradient at that point during backward (empty = pass everything).
class ActivationTap {
 public:
  virtual ~ActivationTap() = default;
  virtual void on_activation(std::size_t point, std::span<double> values, std::vector<std::uint8_t>& pass) = 0;
};

struct ModuleTrace {
  nn::Tensor x;  // module input
  nn::Tensor body_pre, f;
  std::vector<double> g, se1_pre, h, z, s_raw, s;
  nn::Tensor e, u;
  nn::Tensor br1_pre, b1, br2_pre, b2;
  std::vector<std::uint8_t> pass_f, pass_g, pass_h, pass_z, pass_s, pass_e, pass_u, pass_b1, pass_b2, pass_out;
};

// Intermediate values of one forward call, consumed by backward.
struct ForwardTrace {
  nn::Tensor input;
  nn::Tensor stem_pre;
  std::vector<std::uint8_t> pass_stem;
  std::vector<ModuleTrace> modules;
  std::vector<std::uint8_t> pass_last;
  std::vector<double> head_in;       // flattened, after dropout
  std::vector<double> dropout_mask;  // empty in infer mode
  double prediction = 0.0;
  // Hash of every ReLU on/off state; lets gradient checks detect kinks.
  std::uint64_t relu_signature = 0;
};

/// Predicted range error (meters) for one CIR of length K.
double forward(const RemnetConfig& config, const ModelWeights& weights, std::span<const double> cir, Mode mode,
               Rng& rng, ActivationTap* tap = nullptr, ForwardTrace* trace = nullptr);

/// Accumulates d(grad_prediction * prediction)/d(weights) into `grads`.
void backward_from_trace(const RemnetConfig& config, const ModelWeights& weights, const ForwardTrace& trace,
                         double grad_prediction, ModelWeights& grads);

struct Example {
  std::span<const double> input;
  double target = 0.0;
};

struct LossAndGrads {
  double loss = 0.0;
  ModelWeights grads;
};

// d|e|/de with the subgradient at zero fixed to 0.
inline double abs_subgradient(double e) { return e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0); }

/// Mean absolute error over the batch and its gradient, train-mode forward
/// (dropout masks drawn from `rng` in batch order).
LossAndGrads backward(const RemnetConfig& config, const ModelWeights& weights, std::span<const Example> batch,
                      Rng& rng);

}  // namespace remnet
