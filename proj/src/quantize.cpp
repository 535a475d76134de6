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

#include "remnet/quant/quantize.hpp"

#include <algorithm>
#include <cmath>

#include "remnet/common.hpp"

namespace remnet::quant {

void QuantParams::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) raise<ConfigError>("quant scale must be positive, got ", scale);
  if (qmin >= qmax) raise<ConfigError>("quant range [", qmin, ", ", qmax, "] is empty");
  if (zero_point < qmin || zero_point > qmax) {
    raise<ConfigError>("zero point ", zero_point, " outside [", qmin, ", ", qmax, "]");
  }
}

QuantParams activation_params(double min, double max, double min_scale) {
  if (!std::isfinite(min) || !std::isfinite(max) || min > max) {
    raise<ConfigError>("activation_params: invalid range [", min, ", ", max, "]");
  }
  min = std::min(min, 0.0);
  max = std::max(max, 0.0);
  QuantParams p;
  p.qmin = -128;
  p.qmax = 127;
  p.scale = std::max({(max - min) / 255.0, kScaleFloor, min_scale});
  const double z = round_half_away(static_cast<double>(p.qmin) - min / p.scale);
  p.zero_point = static_cast<std::int32_t>(std::clamp(z, static_cast<double>(p.qmin), static_cast<double>(p.qmax)));
  return p;
}

QuantParams weight_params(double max_abs) {
  if (!std::isfinite(max_abs) || max_abs < 0.0) raise<ConfigError>("weight_params: invalid max |w| ", max_abs);
  return QuantParams{std::max(max_abs / 127.0, kScaleFloor), 0, -127, 127};
}

QuantParams bias_params(double scale) {
  return QuantParams{std::max(scale, 1e-300), 0, std::numeric_limits<std::int32_t>::min() + 1,
                     std::numeric_limits<std::int32_t>::max()};
}

QuantParams gate_params() { return QuantParams{1.0 / 256.0, -128, -128, 127}; }

std::int32_t quantize(double r, const QuantParams& p) {
  const double q = round_half_away(r / p.scale) + static_cast<double>(p.zero_point);
  return static_cast<std::int32_t>(std::clamp(q, static_cast<double>(p.qmin), static_cast<double>(p.qmax)));
}

double dequantize(std::int32_t q, const QuantParams& p) {
  return p.scale * static_cast<double>(static_cast<std::int64_t>(q) - p.zero_point);
}

nn::Tensor fake_quant(const nn::Tensor& x, const QuantParams& p) {
  nn::Tensor out = x;
  for (auto& v : out.storage()) v = fake_quant(v, p);
  return out;
}

std::vector<double> fake_quant_backward(std::span<const double> grad_out, std::span<const double> x,
                                        const QuantParams& p) {
  if (grad_out.size() != x.size()) raise<ShapeError>("fake_quant_backward: ", grad_out.size(), " vs ", x.size());
  const double lo = p.real_min();
  const double hi = p.real_max();
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = (x[i] >= lo && x[i] <= hi) ? grad_out[i] : 0.0;
  return g;
}

double max_abs(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace remnet::quant
