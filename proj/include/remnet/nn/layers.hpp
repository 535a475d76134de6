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

// Forward and backward kernels for the layer kinds the range-error network
// needs. Kernels are pure functions templated on the scalar type: training
// runs in double, the float32 inference path instantiates them with float.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "remnet/common.hpp"
#include "remnet/nn/tensor.hpp"
#include "remnet/rng.hpp"

namespace remnet::nn {

enum class Activation { linear, relu, sigmoid };

// Output length of a stride-s convolution with `same` zero padding.
constexpr std::size_t same_output_length(std::size_t length, std::size_t stride) {
  return (length + stride - 1) / stride;
}

namespace detail {

inline void require_conv_shapes(std::size_t in_rank, std::size_t w_rank, std::size_t cin, std::size_t w_cin,
                                std::size_t k, std::size_t cout, std::size_t bias_len, std::size_t stride) {
  if (in_rank != 2) raise<ShapeError>("conv1d: input must be rank 2 (length x channels), got rank ", in_rank);
  if (w_rank != 3) raise<ShapeError>("conv1d: weights must be rank 3 (kernel x in x out), got rank ", w_rank);
  if (cin != w_cin) raise<ShapeError>("conv1d: input channels ", cin, " != weight in_channels ", w_cin);
  if (k % 2 == 0) raise<ShapeError>("conv1d: kernel size must be odd, got ", k);
  if (bias_len != cout) raise<ShapeError>("conv1d: bias length ", bias_len, " != out_channels ", cout);
  if (stride == 0) raise<ShapeError>("conv1d: stride must be positive");
}

template <typename T>
T sigmoid_scalar(T x) {
  // Clamped so the result stays strictly inside (0, 1) even where exp saturates.
  const T s = T(1) / (T(1) + std::exp(-x));
  return std::clamp(s, std::numeric_limits<T>::min(), T(1) - std::numeric_limits<T>::epsilon() / T(2));
}

}  // namespace detail

// out[t, o] = bias[o] + sum_{j,c} input[s*t + j - k/2, c] * weights[j, c, o],
// with input outside [0, L) read as zero.
template <typename T>
BasicTensor<T> conv1d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights, std::span<const T> bias,
                              std::size_t stride) {
  detail::require_conv_shapes(input.rank(), weights.rank(), input.rank() == 2 ? input.dim(1) : 0,
                              weights.rank() == 3 ? weights.dim(1) : 0, weights.rank() == 3 ? weights.dim(0) : 0,
                              weights.rank() == 3 ? weights.dim(2) : 0, bias.size(), stride);
  const std::size_t length = input.dim(0);
  const std::size_t cin = input.dim(1);
  const std::size_t k = weights.dim(0);
  const std::size_t cout = weights.dim(2);
  const std::size_t out_len = same_output_length(length, stride);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);

  BasicTensor<T> out({out_len, cout});
  const T* x = input.data();
  const T* w = weights.data();
  for (std::size_t t = 0; t < out_len; ++t) {
    T* o = out.data() + t * cout;
    std::copy(bias.begin(), bias.end(), o);
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + j) - pad;
      if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(length)) continue;
      const T* xr = x + static_cast<std::size_t>(pos) * cin;
      const T* wj = w + j * cin * cout;
      for (std::size_t c = 0; c < cin; ++c) {
        const T xv = xr[c];
        const T* wr = wj + c * cout;
        for (std::size_t oc = 0; oc < cout; ++oc) o[oc] += xv * wr[oc];
      }
    }
  }
  check_finite<T>(out.values(), "conv1d_forward");
  return out;
}

template <typename T>
struct Conv1dGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  std::vector<T> bias;
};

template <typename T>
Conv1dGrads<T> conv1d_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& cached_input,
                               const BasicTensor<T>& weights, std::size_t stride) {
  detail::require_conv_shapes(cached_input.rank(), weights.rank(),
                              cached_input.rank() == 2 ? cached_input.dim(1) : 0,
                              weights.rank() == 3 ? weights.dim(1) : 0, weights.rank() == 3 ? weights.dim(0) : 0,
                              weights.rank() == 3 ? weights.dim(2) : 0,
                              weights.rank() == 3 ? weights.dim(2) : 0, stride);
  const std::size_t length = cached_input.dim(0);
  const std::size_t cin = cached_input.dim(1);
  const std::size_t k = weights.dim(0);
  const std::size_t cout = weights.dim(2);
  const std::size_t out_len = same_output_length(length, stride);
  if (grad_out.rank() != 2 || grad_out.dim(0) != out_len || grad_out.dim(1) != cout) {
    raise<ShapeError>("conv1d_backward: grad_out shape ", grad_out.shape_string(), " expected [", out_len, "x",
                      cout, "]");
  }
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);

  Conv1dGrads<T> g{BasicTensor<T>({length, cin}), BasicTensor<T>(weights.shape()), std::vector<T>(cout, T{0})};
  const T* x = cached_input.data();
  const T* w = weights.data();
  T* gx = g.input.data();
  T* gw = g.weights.data();
  for (std::size_t t = 0; t < out_len; ++t) {
    const T* go = grad_out.data() + t * cout;
    for (std::size_t oc = 0; oc < cout; ++oc) g.bias[oc] += go[oc];
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + j) - pad;
      if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(length)) continue;
      const T* xr = x + static_cast<std::size_t>(pos) * cin;
      T* gxr = gx + static_cast<std::size_t>(pos) * cin;
      const T* wj = w + j * cin * cout;
      T* gwj = gw + j * cin * cout;
      for (std::size_t c = 0; c < cin; ++c) {
        const T* wr = wj + c * cout;
        T* gwr = gwj + c * cout;
        const T xv = xr[c];
        T acc{0};
        for (std::size_t oc = 0; oc < cout; ++oc) {
          acc += go[oc] * wr[oc];
          gwr[oc] += go[oc] * xv;
        }
        gxr[c] += acc;
      }
    }
  }
  check_finite<T>(g.input.values(), "conv1d_backward(input)");
  check_finite<T>(g.weights.values(), "conv1d_backward(weights)");
  check_finite<T>(g.bias, "conv1d_backward(bias)");
  return g;
}

template <typename T>
std::vector<T> relu_forward(std::span<const T> input) {
  std::vector<T> out(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{0} ? input[i] : T{0};
  check_finite<T>(out, "relu_forward");
  return out;
}

// Gradient through ReLU given the layer's input (pre-activation).
template <typename T>
std::vector<T> relu_backward(std::span<const T> grad_out, std::span<const T> input) {
  if (grad_out.size() != input.size()) raise<ShapeError>("relu_backward: ", grad_out.size(), " vs ", input.size());
  std::vector<T> g(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) g[i] = input[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

template <typename T>
std::vector<T> sigmoid_forward(std::span<const T> input) {
  std::vector<T> out(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = detail::sigmoid_scalar(input[i]);
  check_finite<T>(out, "sigmoid_forward");
  return out;
}

// Gradient through sigmoid given the layer's output.
template <typename T>
std::vector<T> sigmoid_backward(std::span<const T> grad_out, std::span<const T> output) {
  if (grad_out.size() != output.size()) {
    raise<ShapeError>("sigmoid_backward: ", grad_out.size(), " vs ", output.size());
  }
  std::vector<T> g(output.size());
  for (std::size_t i = 0; i < output.size(); ++i) g[i] = grad_out[i] * output[i] * (T(1) - output[i]);
  return g;
}

// y = act(x W + b), W is (n x m).
template <typename T>
std::vector<T> dense_forward(std::span<const T> input, const BasicTensor<T>& weights, std::span<const T> bias,
                             Activation activation) {
  if (weights.rank() != 2) raise<ShapeError>("dense: weights must be rank 2, got ", weights.shape_string());
  const std::size_t n = weights.dim(0);
  const std::size_t m = weights.dim(1);
  if (input.size() != n) raise<ShapeError>("dense: input length ", input.size(), " != weight rows ", n);
  if (bias.size() != m) raise<ShapeError>("dense: bias length ", bias.size(), " != weight cols ", m);
  std::vector<T> out(bias.begin(), bias.end());
  const T* w = weights.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T xv = input[i];
    const T* wr = w + i * m;
    for (std::size_t j = 0; j < m; ++j) out[j] += xv * wr[j];
  }
  switch (activation) {
    case Activation::linear:
      break;
    case Activation::relu:
      for (auto& v : out) v = v > T{0} ? v : T{0};
      break;
    case Activation::sigmoid:
      for (auto& v : out) v = detail::sigmoid_scalar(v);
      break;
  }
  check_finite<T>(out, "dense_forward");
  return out;
}

template <typename T>
struct DenseGrads {
  std::vector<T> input;
  BasicTensor<T> weights;
  std::vector<T> bias;
};

// `output` is the post-activation output of the matching forward call.
template <typename T>
DenseGrads<T> dense_backward(std::span<const T> grad_out, std::span<const T> input, const BasicTensor<T>& weights,
                             std::span<const T> output, Activation activation) {
  if (weights.rank() != 2) raise<ShapeError>("dense_backward: weights must be rank 2");
  const std::size_t n = weights.dim(0);
  const std::size_t m = weights.dim(1);
  if (input.size() != n || grad_out.size() != m || output.size() != m) {
    raise<ShapeError>("dense_backward: input ", input.size(), " grad_out ", grad_out.size(), " output ",
                      output.size(), " vs weights ", weights.shape_string());
  }
  std::vector<T> gz(m);
  for (std::size_t j = 0; j < m; ++j) {
    switch (activation) {
      case Activation::linear:
        gz[j] = grad_out[j];
        break;
      case Activation::relu:
        gz[j] = output[j] > T{0} ? grad_out[j] : T{0};
        break;
      case Activation::sigmoid:
        gz[j] = grad_out[j] * output[j] * (T(1) - output[j]);
        break;
    }
  }
  DenseGrads<T> g{std::vector<T>(n, T{0}), BasicTensor<T>(weights.shape()), gz};
  const T* w = weights.data();
  T* gw = g.weights.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T* wr = w + i * m;
    T* gwr = gw + i * m;
    T acc{0};
    for (std::size_t j = 0; j < m; ++j) {
      acc += gz[j] * wr[j];
      gwr[j] = gz[j] * input[i];
    }
    g.input[i] = acc;
  }
  check_finite<T>(g.input, "dense_backward(input)");
  check_finite<T>(g.weights.values(), "dense_backward(weights)");
  return g;
}

// Mean over the temporal axis of an (L x C) map.
template <typename T>
std::vector<T> global_avg_pool(const BasicTensor<T>& input) {
  if (input.rank() != 2) raise<ShapeError>("global_avg_pool: input must be rank 2, got ", input.shape_string());
  const std::size_t length = input.dim(0);
  const std::size_t channels = input.dim(1);
  if (length == 0) raise<ShapeError>("global_avg_pool: empty temporal axis");
  std::vector<T> out(channels, T{0});
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t c = 0; c < channels; ++c) out[c] += input(t, c);
  }
  for (auto& v : out) v /= static_cast<T>(length);
  check_finite<T>(out, "global_avg_pool");
  return out;
}

template <typename T>
BasicTensor<T> global_avg_pool_backward(std::span<const T> grad_out, std::size_t length) {
  const std::size_t channels = grad_out.size();
  BasicTensor<T> g({length, channels});
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t c = 0; c < channels; ++c) g(t, c) = grad_out[c] / static_cast<T>(length);
  }
  return g;
}

template <typename T>
std::vector<T> add_forward(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) raise<ShapeError>("add: operand lengths ", a.size(), " and ", b.size());
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  check_finite<T>(out, "add_forward");
  return out;
}

template <typename T>
struct DropoutResult {
  std::vector<T> output;
  // Per-element multiplier applied (0 or 1/(1-rate)); empty when identity.
  std::vector<T> mask;
};

// Inverted dropout: survivors are scaled at train time so inference is the
// identity. One uniform draw per element, dropped when the draw is < rate.
template <typename T>
DropoutResult<T> dropout_forward(std::span<const T> input, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) raise<ConfigError>("dropout rate must be in [0, 1), got ", rate);
  DropoutResult<T> r{std::vector<T>(input.begin(), input.end()), {}};
  if (!training || rate == 0.0) return r;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  r.mask.resize(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    r.mask[i] = rng.uniform() < rate ? T{0} : keep_scale;
    r.output[i] = input[i] * r.mask[i];
  }
  check_finite<T>(r.output, "dropout_forward");
  return r;
}

template <typename T>
std::vector<T> dropout_backward(std::span<const T> grad_out, std::span<const T> mask) {
  std::vector<T> g(grad_out.begin(), grad_out.end());
  if (mask.empty()) return g;
  if (mask.size() != g.size()) raise<ShapeError>("dropout_backward: mask length ", mask.size(), " vs ", g.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
  return g;
}

}  // namespace remnet::nn
