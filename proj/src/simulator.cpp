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

#include "remnet/quant/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "remnet/nn/layers.hpp"

namespace remnet::quant {
namespace {

using nn::Tensor;

constexpr double kExactLimit = 9007199254740992.0;  // 2^53
// Largest tolerated distance of a real accumulator from its integer grid.
constexpr double kGridTolerance = 1e-3;

double snap(double value, double scale) {
  const double a = value / scale;
  const double q = round_half_away(a);
  if (std::abs(a - q) > kGridTolerance) raise<Error>("simulator: value ", a, " is off the accumulator grid");
  return q;
}

// Real accumulator values -> requantized real activations.
void requantize(std::span<double> values, double acc_scale, const FixedPointMultiplier& m, const QuantParams& out,
                bool relu) {
  for (double& v : values) {
    double acc = snap(v, acc_scale);
    if (relu) acc = std::max(acc, 0.0);
    const double y = emulate_fixed_point_mul(acc, m);
    const double q = std::clamp(static_cast<double>(out.zero_point) + y, -128.0, 127.0);
    v = dequantize(static_cast<std::int32_t>(q), out);
  }
}

std::vector<double> add_sim(std::span<const double> a, const QuantParams& pa, const FixedPointMultiplier& ma,
                            std::span<const double> b, const QuantParams& pb, const FixedPointMultiplier& mb,
                            const FixedPointMultiplier& m_out, const QuantParams& p_out) {
  const double lifted = std::ldexp(1.0, -kAddLeftShift);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ta = emulate_fixed_point_mul(snap(a[i], pa.scale * lifted), ma);
    const double tb = emulate_fixed_point_mul(snap(b[i], pb.scale * lifted), mb);
    const double y = emulate_fixed_point_mul(ta + tb, m_out);
    const double q = std::clamp(static_cast<double>(p_out.zero_point) + y, -128.0, 127.0);
    out[i] = dequantize(static_cast<std::int32_t>(q), p_out);
  }
  return out;
}

}  // namespace

double emulate_fixed_point_mul(double acc, const FixedPointMultiplier& m) {
  const double prod = acc * static_cast<double>(m.m0);
  if (!(std::abs(prod) < kExactLimit)) raise<Error>("simulator: |acc * m0| = ", std::abs(prod), " exceeds 2^53");
  const double high = round_half_away(std::ldexp(prod, -31));
  return round_half_away(std::ldexp(high, -static_cast<int>(m.right_shift)));
}

double simulate_quantized(const QuantizedModel& qm, std::span<const double> cir, SimTrace* trace) {
  const RemnetConfig& cfg = qm.config;
  const std::size_t fch = cfg.filters;
  const std::size_t k_in = cfg.input_length;
  if (cir.size() != k_in) raise<ShapeError>("simulate_quantized: input length ", cir.size(), " != K=", k_in);
  const ModelWeights w = qm.dequantized_weights();
  const auto& act = qm.activations;
  const auto& mul = qm.multipliers;
  auto ws = [&](std::size_t idx) { return qm.tensors[idx].params.scale; };
  auto record = [&](std::size_t pt, std::span<const double> v) {
    if (trace) trace->points[pt].assign(v.begin(), v.end());
  };
  if (trace) trace->points.assign(activation_point_count(cfg), {});

  Tensor x({k_in, 1});
  for (std::size_t t = 0; t < k_in; ++t) x[t] = fake_quant(cir[t], act[point::kInput]);
  record(point::kInput, x.values());

  Tensor a = nn::conv1d_forward<double>(x, w[param::kStemW], w[param::kStemB].values(), 1);
  requantize(a.values(), act[point::kInput].scale * ws(param::kStemW), mul[mult::kStem], act[point::kStem], true);
  record(point::kStem, a.values());

  std::size_t x_point = point::kStem;
  for (std::size_t i = 0; i < cfg.modules; ++i) {
    using point::module;
    auto pi = [&](param::ModuleSlot s) { return param::module(i, s); };
    auto m = [&](mult::ModuleSlot s) -> const FixedPointMultiplier& { return mul[mult::module(i, s)]; };
    auto p = [&](point::ModuleSlot s) -> const QuantParams& { return act[module(i, s)]; };
    const QuantParams& px = act[x_point];
    const std::size_t len = a.dim(0);

    Tensor f = nn::conv1d_forward<double>(a, w[pi(param::body_w)], w[pi(param::body_b)].values(), 1);
    requantize(f.values(), px.scale * ws(pi(param::body_w)), m(mult::body), p(point::body), true);
    record(module(i, point::body), f.values());

    std::vector<double> g = nn::global_avg_pool(f);
    requantize(g, p(point::body).scale / static_cast<double>(len), m(mult::gap), p(point::gap), false);
    record(module(i, point::gap), g);

    std::vector<double> h = nn::dense_forward<double>(g, w[pi(param::se1_w)], w[pi(param::se1_b)].values(),
                                                      nn::Activation::linear);
    requantize(h, p(point::gap).scale * ws(pi(param::se1_w)), m(mult::se1), p(point::se1), true);
    record(module(i, point::se1), h);

    std::vector<double> z = nn::dense_forward<double>(h, w[pi(param::se2_w)], w[pi(param::se2_b)].values(),
                                                      nn::Activation::linear);
    requantize(z, p(point::se1).scale * ws(pi(param::se2_w)), m(mult::se2), p(point::se2), false);
    record(module(i, point::se2), z);

    std::vector<double> s = nn::sigmoid_forward<double>(z);
    for (double& v : s) v = fake_quant(v, p(point::gate));
    record(module(i, point::gate), s);

    Tensor e({len, fch});
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t c = 0; c < fch; ++c) e(t, c) = f(t, c) * s[c];
    }
    requantize(e.values(), p(point::body).scale * p(point::gate).scale, m(mult::mul), p(point::scaled), false);
    record(module(i, point::scaled), e.values());

    Tensor u(a.shape(), add_sim(a.values(), px, m(mult::res_x), e.values(), p(point::scaled), m(mult::res_e),
                                m(mult::res_out), p(point::residual)));
    record(module(i, point::residual), u.values());

    Tensor b1 = nn::conv1d_forward<double>(u, w[pi(param::br1_w)], w[pi(param::br1_b)].values(), 2);
    requantize(b1.values(), p(point::residual).scale * ws(pi(param::br1_w)), m(mult::br1), p(point::br1), true);
    record(module(i, point::br1), b1.values());
    Tensor b2 = nn::conv1d_forward<double>(u, w[pi(param::br2_w)], w[pi(param::br2_b)].values(), 2);
    requantize(b2.values(), p(point::residual).scale * ws(pi(param::br2_w)), m(mult::br2), p(point::br2), true);
    record(module(i, point::br2), b2.values());

    a = Tensor(b1.shape(), add_sim(b1.values(), p(point::br1), m(mult::sum_a), b2.values(), p(point::br2),
                                   m(mult::sum_b), m(mult::sum_out), p(point::out)));
    record(module(i, point::out), a.values());
    x_point = module(i, point::out);
  }

  const QTensor& hb = qm.tensors[param::head_b(cfg.modules)];
  const auto out = nn::dense_forward<double>(a.values(), w[param::head_w(cfg.modules)],
                                             w[param::head_b(cfg.modules)].values(), nn::Activation::linear);
  const double acc = snap(out[0], hb.params.scale);
  return dequantize(static_cast<std::int32_t>(acc), hb.params);
}

}  // namespace remnet::quant
