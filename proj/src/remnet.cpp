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

#include "remnet/model/remnet.hpp"

#include <cmath>

#include "remnet/nn/layers.hpp"

namespace remnet {

using nn::Activation;
using nn::Tensor;

void RemnetConfig::validate() const {
  if (input_length == 0) raise<ConfigError>("input_length (K) must be positive");
  if (filters == 0) raise<ConfigError>("filters (F) must be positive");
  if (modules == 0 || modules > 16) raise<ConfigError>("modules (N) must be in [1, 16], got ", modules);
  if (input_length % (1u << modules) != 0) {
    raise<ConfigError>("input_length K=", input_length, " must be divisible by 2^N=", 1u << modules);
  }
  if (se_reduction == 0) raise<ConfigError>("se_reduction (r) must be positive");
  if (filters % se_reduction != 0) {
    raise<ConfigError>("filters F=", filters, " must be divisible by se_reduction r=", se_reduction);
  }
  // A single-unit bottleneck is rejected along with F/r < 1.
  if (filters / se_reduction < 2) {
    raise<ConfigError>("SE bottleneck F/r=", filters / se_reduction, " must be at least 2");
  }
  for (auto [k, what] : {std::pair{first_kernel, "first_kernel"}, std::pair{body_kernel, "body_kernel"},
                         std::pair{branch2_kernel, "branch2_kernel"}}) {
    if (k == 0 || k % 2 == 0) raise<ConfigError>(what, " must be a positive odd number, got ", k);
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    raise<ConfigError>("dropout_rate must be in [0, 1), got ", dropout_rate);
  }
}

std::size_t parameter_count(const RemnetConfig& c) {
  c.validate();
  const std::size_t f = c.filters;
  const std::size_t w = c.se_width();
  const std::size_t stem = c.first_kernel * f + f;
  const std::size_t per_module = (c.body_kernel * f * f + f)        // body conv
                                 + (f * w + w) + (w * f + f)        // SE
                                 + (c.body_kernel * f * f + f)      // branch 1
                                 + (c.branch2_kernel * f * f + f);  // branch 2
  const std::size_t head = c.head_inputs() + 1;
  return stem + c.modules * per_module + head;
}

ModelWeights remnet_layout(const RemnetConfig& c) {
  c.validate();
  const std::size_t f = c.filters;
  const std::size_t w = c.se_width();
  ModelWeights m;
  m.add("stem.w", {c.first_kernel, 1, f});
  m.add("stem.b", {f});
  for (std::size_t i = 0; i < c.modules; ++i) {
    const std::string p = "rrm" + std::to_string(i) + ".";
    m.add(p + "body.w", {c.body_kernel, f, f});
    m.add(p + "body.b", {f});
    m.add(p + "se1.w", {f, w});
    m.add(p + "se1.b", {w});
    m.add(p + "se2.w", {w, f});
    m.add(p + "se2.b", {f});
    m.add(p + "br1.w", {c.body_kernel, f, f});
    m.add(p + "br1.b", {f});
    m.add(p + "br2.w", {c.branch2_kernel, f, f});
    m.add(p + "br2.b", {f});
  }
  m.add("head.w", {c.head_inputs(), 1});
  m.add("head.b", {1});
  return m;
}

namespace {

double glorot_limit(const Tensor& t) {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  if (t.rank() == 3) {
    fan_in = t.dim(0) * t.dim(1);
    fan_out = t.dim(0) * t.dim(2);
  } else {
    fan_in = t.dim(0);
    fan_out = t.dim(1);
  }
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void accumulate(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void accumulate(Tensor& dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void apply_pass(std::span<double> g, const std::vector<std::uint8_t>& pass) {
  if (pass.empty()) return;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!pass[i]) g[i] = 0.0;
  }
}

void mix_signature(std::uint64_t& h, std::span<const double> pre) {
  for (double v : pre) {
    h ^= (v > 0.0 ? 0x9E3779B97F4A7C15ULL : 0x632BE59BD9B4E019ULL);
    h = (h << 7) | (h >> 57);
    h *= 0xBF58476D1CE4E5B9ULL;
  }
}

Tensor relu_tensor(const Tensor& pre) { return Tensor(pre.shape(), nn::relu_forward<double>(pre.values())); }

}  // namespace

ModelWeights build(const RemnetConfig& config, Rng& rng) {
  ModelWeights m = remnet_layout(config);
  for (auto& p : m.params()) {
    if (p.value.rank() < 2) continue;  // biases stay zero
    const double limit = glorot_limit(p.value);
    for (auto& v : p.value.storage()) v = rng.uniform(-limit, limit);
  }
  return m;
}

std::size_t activation_point_count(const RemnetConfig& config) { return 2 + point::kPerModule * config.modules; }

std::vector<std::string> activation_point_names(const RemnetConfig& config) {
  static constexpr const char* kSlots[] = {"body", "gap", "se1", "se2", "gate",
                                           "scaled", "residual", "br1", "br2", "out"};
  std::vector<std::string> names{"input", "stem"};
  for (std::size_t i = 0; i < config.modules; ++i) {
    for (const char* s : kSlots) names.push_back("rrm" + std::to_string(i) + "." + s);
  }
  return names;
}

double forward(const RemnetConfig& config, const ModelWeights& w, std::span<const double> cir, Mode mode, Rng& rng,
               ActivationTap* tap, ForwardTrace* trace) {
  const std::size_t k_in = config.input_length;
  const std::size_t f = config.filters;
  if (cir.size() != k_in) raise<ShapeError>("forward: input length ", cir.size(), " != K=", k_in);
  check_finite<double>(cir, "forward(input)");

  ForwardTrace local;
  ForwardTrace& tr = trace ? *trace : local;
  tr.modules.assign(config.modules, ModuleTrace{});
  std::vector<std::uint8_t> ignored;

  auto observe = [&](std::size_t pt, std::span<double> v, std::vector<std::uint8_t>& pass) {
    pass.clear();
    if (tap) tap->on_activation(pt, v, pass);
  };

  tr.input = Tensor({k_in, 1}, std::vector<double>(cir.begin(), cir.end()));
  observe(point::kInput, tr.input.values(), ignored);

  tr.stem_pre = nn::conv1d_forward<double>(tr.input, w[param::kStemW], w[param::kStemB].values(), 1);
  Tensor a = relu_tensor(tr.stem_pre);
  observe(point::kStem, a.values(), tr.pass_stem);

  std::uint64_t sig = 0x12345678ULL;
  mix_signature(sig, tr.stem_pre.values());

  for (std::size_t i = 0; i < config.modules; ++i) {
    using param::module;
    ModuleTrace& m = tr.modules[i];
    m.x = std::move(a);

    m.body_pre = nn::conv1d_forward<double>(m.x, w[module(i, param::body_w)], w[module(i, param::body_b)].values(), 1);
    m.f = relu_tensor(m.body_pre);
    observe(point::module(i, point::body), m.f.values(), m.pass_f);

    m.g = nn::global_avg_pool(m.f);
    observe(point::module(i, point::gap), m.g, m.pass_g);

    m.se1_pre = nn::dense_forward<double>(m.g, w[module(i, param::se1_w)], w[module(i, param::se1_b)].values(),
                                          Activation::linear);
    m.h = nn::relu_forward<double>(m.se1_pre);
    observe(point::module(i, point::se1), m.h, m.pass_h);

    m.z = nn::dense_forward<double>(m.h, w[module(i, param::se2_w)], w[module(i, param::se2_b)].values(),
                                    Activation::linear);
    observe(point::module(i, point::se2), m.z, m.pass_z);

    m.s_raw = nn::sigmoid_forward<double>(m.z);
    m.s = m.s_raw;
    observe(point::module(i, point::gate), m.s, m.pass_s);

    const std::size_t len = m.f.dim(0);
    m.e = Tensor({len, f});
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t c = 0; c < f; ++c) m.e(t, c) = m.f(t, c) * m.s[c];
    }
    observe(point::module(i, point::scaled), m.e.values(), m.pass_e);

    m.u = Tensor(m.x.shape(), nn::add_forward<double>(m.x.values(), m.e.values()));
    observe(point::module(i, point::residual), m.u.values(), m.pass_u);

    m.br1_pre = nn::conv1d_forward<double>(m.u, w[module(i, param::br1_w)], w[module(i, param::br1_b)].values(), 2);
    m.b1 = relu_tensor(m.br1_pre);
    observe(point::module(i, point::br1), m.b1.values(), m.pass_b1);

    m.br2_pre = nn::conv1d_forward<double>(m.u, w[module(i, param::br2_w)], w[module(i, param::br2_b)].values(), 2);
    m.b2 = relu_tensor(m.br2_pre);
    observe(point::module(i, point::br2), m.b2.values(), m.pass_b2);

    a = Tensor(m.b1.shape(), nn::add_forward<double>(m.b1.values(), m.b2.values()));
    observe(point::module(i, point::out), a.values(), m.pass_out);

    mix_signature(sig, m.body_pre.values());
    mix_signature(sig, m.se1_pre);
    mix_signature(sig, m.br1_pre.values());
    mix_signature(sig, m.br2_pre.values());
  }

  auto dropped = nn::dropout_forward<double>(a.values(), config.dropout_rate, rng, mode == Mode::train);
  tr.head_in = std::move(dropped.output);
  tr.dropout_mask = std::move(dropped.mask);
  const auto out = nn::dense_forward<double>(tr.head_in, w[param::head_w(config.modules)],
                                             w[param::head_b(config.modules)].values(), Activation::linear);
  tr.prediction = out[0];
  tr.relu_signature = sig;
  return tr.prediction;
}

void backward_from_trace(const RemnetConfig& config, const ModelWeights& w, const ForwardTrace& tr, double gp,
                         ModelWeights& grads) {
  const std::size_t n = config.modules;
  const std::size_t f = config.filters;
  const auto& head_w = w[param::head_w(n)];

  accumulate(grads[param::head_b(n)], std::span<const double>(&gp, 1));
  std::vector<double> g_flat(tr.head_in.size());
  {
    Tensor& ghw = grads[param::head_w(n)];
    for (std::size_t i = 0; i < tr.head_in.size(); ++i) {
      ghw[i] += tr.head_in[i] * gp;
      g_flat[i] = head_w[i] * gp;
    }
  }
  g_flat = nn::dropout_backward<double>(g_flat, tr.dropout_mask);
  Tensor ga({config.length_at(n), f}, std::move(g_flat));

  for (std::size_t ii = n; ii-- > 0;) {
    using param::module;
    const ModuleTrace& m = tr.modules[ii];
    apply_pass(ga.values(), m.pass_out);

    // Reduction block: both branches read u and receive the same gradient.
    Tensor gb1(ga.shape(), nn::relu_backward<double>(ga.values(), m.br1_pre.values()));
    Tensor gb2(ga.shape(), nn::relu_backward<double>(ga.values(), m.br2_pre.values()));
    apply_pass(gb1.values(), m.pass_b1);
    apply_pass(gb2.values(), m.pass_b2);
    auto c1 = nn::conv1d_backward<double>(gb1, m.u, w[module(ii, param::br1_w)], 2);
    auto c2 = nn::conv1d_backward<double>(gb2, m.u, w[module(ii, param::br2_w)], 2);
    accumulate(grads[module(ii, param::br1_w)], c1.weights);
    accumulate(grads[module(ii, param::br1_b)], c1.bias);
    accumulate(grads[module(ii, param::br2_w)], c2.weights);
    accumulate(grads[module(ii, param::br2_b)], c2.bias);
    Tensor gu = std::move(c1.input);
    accumulate(gu, c2.input);
    apply_pass(gu.values(), m.pass_u);

    // Residual unit: u = x + f * s.
    Tensor gx = gu;
    Tensor ge = gu;
    apply_pass(ge.values(), m.pass_e);
    const std::size_t len = m.f.dim(0);
    Tensor gf({len, f});
    std::vector<double> gs(f, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t c = 0; c < f; ++c) {
        gf(t, c) = ge(t, c) * m.s[c];
        gs[c] += ge(t, c) * m.f(t, c);
      }
    }
    apply_pass(gs, m.pass_s);
    auto gz = nn::sigmoid_backward<double>(gs, m.s_raw);
    apply_pass(gz, m.pass_z);
    auto d2 = nn::dense_backward<double>(gz, m.h, w[module(ii, param::se2_w)], m.z, Activation::linear);
    accumulate(grads[module(ii, param::se2_w)], d2.weights);
    accumulate(grads[module(ii, param::se2_b)], d2.bias);
    apply_pass(d2.input, m.pass_h);
    auto gh = nn::relu_backward<double>(d2.input, m.se1_pre);
    auto d1 = nn::dense_backward<double>(gh, m.g, w[module(ii, param::se1_w)], m.se1_pre, Activation::linear);
    accumulate(grads[module(ii, param::se1_w)], d1.weights);
    accumulate(grads[module(ii, param::se1_b)], d1.bias);
    apply_pass(d1.input, m.pass_g);
    accumulate(gf, nn::global_avg_pool_backward<double>(d1.input, len));

    apply_pass(gf.values(), m.pass_f);
    Tensor gbody(gf.shape(), nn::relu_backward<double>(gf.values(), m.body_pre.values()));
    auto cb = nn::conv1d_backward<double>(gbody, m.x, w[module(ii, param::body_w)], 1);
    accumulate(grads[module(ii, param::body_w)], cb.weights);
    accumulate(grads[module(ii, param::body_b)], cb.bias);
    accumulate(gx, cb.input);
    ga = std::move(gx);
  }

  apply_pass(ga.values(), tr.pass_stem);
  Tensor gstem(ga.shape(), nn::relu_backward<double>(ga.values(), tr.stem_pre.values()));
  auto cs = nn::conv1d_backward<double>(gstem, tr.input, w[param::kStemW], 1);
  accumulate(grads[param::kStemW], cs.weights);
  accumulate(grads[param::kStemB], cs.bias);
}

LossAndGrads backward(const RemnetConfig& config, const ModelWeights& weights, std::span<const Example> batch,
                      Rng& rng) {
  if (batch.empty()) raise<DataError>("backward: empty batch");
  LossAndGrads out{0.0, weights.zeros_like()};
  const double inv = 1.0 / static_cast<double>(batch.size());
  ForwardTrace trace;
  for (const auto& ex : batch) {
    const double pred = forward(config, weights, ex.input, Mode::train, rng, nullptr, &trace);
    const double err = pred - ex.target;
    out.loss += std::abs(err);
    backward_from_trace(config, weights, trace, abs_subgradient(err) * inv, out.grads);
  }
  out.loss *= inv;
  return out;
}

}  // namespace remnet
