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

#include "remnet/quant/int8_engine.hpp"

#include <algorithm>
#include <cstring>

#if defined(__SSE2__)
#include <emmintrin.h>
#endif

namespace remnet::quant {
namespace {

// `same`-padded convolution accumulators. The input is centered (q - Z) into
// a buffer with k/2 zero rows on each side, so padding reads real zero and
// every receptive field is one contiguous run of k * cin values. Weights are
// stored as interleaved pairs, (span / 2) x cout x 2, so one 16-bit
// multiply-add covers two taps of four output channels. |q - Z| <= 255 and
// |w| <= 127, hence no pair sum can overflow.
void conv_acc(const std::int8_t* x, std::size_t length, std::size_t cin, std::int32_t zx, std::size_t k,
              std::size_t cout, const std::int16_t* wp, const std::int32_t* bias, std::size_t stride,
              std::int16_t* padded, std::int32_t* acc) {
  const std::size_t pad = k / 2;
  const std::size_t pairs = (k * cin + 1) / 2;
  const std::size_t out_len = (length + stride - 1) / stride;

  std::fill(padded, padded + pad * cin, std::int16_t{0});
  for (std::size_t i = 0; i < length * cin; ++i) padded[pad * cin + i] = static_cast<std::int16_t>(x[i] - zx);
  // One extra slot: an odd span reads it against a zero weight.
  std::fill(padded + (pad + length) * cin, padded + (2 * pad + length) * cin + 1, std::int16_t{0});

  for (std::size_t t = 0; t < out_len; ++t) {
    const std::int16_t* window = padded + t * stride * cin;
    std::int32_t* a = acc + t * cout;
    std::size_t oc = 0;
#if defined(__SSE2__)
    for (; oc + 8 <= cout; oc += 8) {
      __m128i s0 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(bias + oc));
      __m128i s1 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(bias + oc + 4));
      for (std::size_t p = 0; p < pairs; ++p) {
        std::int32_t xx;
        std::memcpy(&xx, window + 2 * p, sizeof xx);
        const __m128i xv = _mm_set1_epi32(xx);
        const std::int16_t* w = wp + (p * cout + oc) * 2;
        s0 = _mm_add_epi32(s0, _mm_madd_epi16(xv, _mm_loadu_si128(reinterpret_cast<const __m128i*>(w))));
        s1 = _mm_add_epi32(s1, _mm_madd_epi16(xv, _mm_loadu_si128(reinterpret_cast<const __m128i*>(w + 8))));
      }
      _mm_storeu_si128(reinterpret_cast<__m128i*>(a + oc), s0);
      _mm_storeu_si128(reinterpret_cast<__m128i*>(a + oc + 4), s1);
    }
#endif
    for (; oc < cout; ++oc) {
      std::int32_t s = bias[oc];
      for (std::size_t p = 0; p < pairs; ++p) {
        const std::int16_t* w = wp + (p * cout + oc) * 2;
        s += window[2 * p] * w[0] + window[2 * p + 1] * w[1];
      }
      a[oc] = s;
    }
  }
}

void dense_acc(const std::int8_t* x, std::size_t n, std::int32_t zx, const QTensor& w, const QTensor& b,
               std::int32_t* acc) {
  const std::size_t m = w.shape[1];
  std::copy(b.q32.begin(), b.q32.end(), acc);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t xv = x[i] - zx;
    const std::int8_t* wr = w.q8.data() + i * m;
    for (std::size_t o = 0; o < m; ++o) acc[o] += xv * wr[o];
  }
}

// Operand of a residual or branch sum: lifted by kAddLeftShift bits and
// scaled onto half the larger input scale. Depends on the int8 value alone.
AddTable make_add_table(const QuantParams& p, const FixedPointMultiplier& m) {
  AddTable t{};
  for (int q = -128; q <= 127; ++q) {
    t[static_cast<std::size_t>(q + 128)] = fixed_point_mul((q - p.zero_point) * (1 << kAddLeftShift), m);
  }
  return t;
}

void add_acc(const std::int8_t* a, const AddTable& ta, const std::int8_t* b, const AddTable& tb, std::size_t n,
             std::int32_t* acc) {
  for (std::size_t i = 0; i < n; ++i) {
    acc[i] = ta[static_cast<std::size_t>(a[i] + 128)] + tb[static_cast<std::size_t>(b[i] + 128)];
  }
}

}  // namespace

std::vector<std::int8_t> quantize_input(const QuantizedModel& model, std::span<const double> cir) {
  if (cir.size() != model.config.input_length) {
    raise<ShapeError>("quantize_input: length ", cir.size(), " != K=", model.config.input_length);
  }
  check_finite<double>(cir, "quantize_input");
  const QuantParams& p = model.activations[point::kInput];
  std::vector<std::int8_t> q(cir.size());
  for (std::size_t i = 0; i < cir.size(); ++i) q[i] = static_cast<std::int8_t>(quantize(cir[i], p));
  return q;
}

Int8Engine::Int8Engine(const QuantizedModel& model) : model_(model) {
  const RemnetConfig& cfg = model.config;
  if (model.sigmoid_tables.size() != cfg.modules) raise<ConfigError>("Int8Engine: sigmoid tables missing");
  const std::size_t big = std::size_t{cfg.input_length} * cfg.filters;
  for (auto* v : {&a_, &f_, &e_, &u_, &b1_, &b2_}) v->resize(big);
  for (auto* v : {&g_, &h_, &z_, &s_}) v->resize(cfg.filters);
  acc_.resize(big);
  const std::size_t max_kernel = std::max({cfg.first_kernel, cfg.body_kernel, cfg.branch2_kernel});
  padded_.resize((cfg.input_length + max_kernel) * cfg.filters + 1);

  const auto& act = model.activations;
  const auto& mul = model.multipliers;
  add_tables_.resize(cfg.modules);
  for (std::size_t i = 0; i < cfg.modules; ++i) {
    const std::size_t x_point = i == 0 ? point::kStem : point::module(i - 1, point::out);
    add_tables_[i] = {make_add_table(act[x_point], mul[mult::module(i, mult::res_x)]),
                      make_add_table(act[point::module(i, point::scaled)], mul[mult::module(i, mult::res_e)]),
                      make_add_table(act[point::module(i, point::br1)], mul[mult::module(i, mult::sum_a)]),
                      make_add_table(act[point::module(i, point::br2)], mul[mult::module(i, mult::sum_b)])};
  }
  paired_.resize(model.tensors.size());
  for (std::size_t idx = 0; idx < model.tensors.size(); idx += 2) {
    const QTensor& t = model.tensors[idx];
    if (t.shape.size() != 3) continue;
    const std::size_t rows = t.shape[0] * t.shape[1];
    const std::size_t cout = t.shape[2];
    auto& dst = paired_[idx];
    dst.assign((rows + 1) / 2 * cout * 2, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < cout; ++o) dst[((r / 2) * cout + o) * 2 + r % 2] = t.q8[r * cout + o];
    }
  }
}

double Int8Engine::run(std::span<const std::int8_t> input, Int8Trace* trace) {
  const QuantizedModel& qm = model_;
  const RemnetConfig& cfg = qm.config;
  const std::size_t fch = cfg.filters;
  const std::size_t k_in = cfg.input_length;
  if (input.size() != k_in) raise<ShapeError>("forward_int8: input length ", input.size(), " != K=", k_in);
  const auto& act = qm.activations;
  const auto& mul = qm.multipliers;
  const auto& ts = qm.tensors;
  std::int32_t* acc = acc_.data();

  auto record = [&](std::size_t pt, const std::int8_t* data, std::size_t n) {
    if (trace) trace->points[pt].assign(data, data + n);
  };
  auto conv = [&](const std::int8_t* x, std::size_t len, std::size_t cin, std::size_t x_point, std::size_t w_idx,
                  std::size_t stride) {
    const QTensor& w = ts[w_idx];
    conv_acc(x, len, cin, act[x_point].zero_point, w.shape[0], w.shape[2], paired_[w_idx].data(),
             ts[w_idx + 1].q32.data(), stride, padded_.data(), acc);
  };
  // ReLU is fused into the clamp: the lower bound becomes the zero point.
  auto requant = [&](std::size_t n, const FixedPointMultiplier& m, std::size_t out_point, bool relu, std::int8_t* out) {
    const std::int32_t z = act[out_point].zero_point;
    requantize_block(acc, n, m, z, relu ? z : -128, out);
    record(out_point, out, n);
  };

  if (trace) trace->points.assign(activation_point_count(cfg), {});
  record(point::kInput, input.data(), k_in);

  conv(input.data(), k_in, 1, point::kInput, param::kStemW, 1);
  requant(k_in * fch, mul[mult::kStem], point::kStem, true, a_.data());

  std::size_t len = k_in;
  std::size_t x_point = point::kStem;
  for (std::size_t i = 0; i < cfg.modules; ++i) {
    using point::module;
    auto m = [&](mult::ModuleSlot s) -> const FixedPointMultiplier& { return mul[mult::module(i, s)]; };
    auto pw = [&](param::ModuleSlot s) { return param::module(i, s); };
    const std::size_t n = len * fch;
    const std::size_t half = (len + 1) / 2;

    conv(a_.data(), len, fch, x_point, pw(param::body_w), 1);
    requant(n, m(mult::body), module(i, point::body), true, f_.data());

    // Squeeze: per-channel sum of centered values, rescaled by 1/L.
    const std::int32_t zf = act[module(i, point::body)].zero_point;
    std::fill(acc, acc + fch, 0);
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t c = 0; c < fch; ++c) acc[c] += f_[t * fch + c] - zf;
    }
    requant(fch, m(mult::gap), module(i, point::gap), false, g_.data());

    const std::size_t width = cfg.se_width();
    dense_acc(g_.data(), fch, act[module(i, point::gap)].zero_point, ts[pw(param::se1_w)], ts[pw(param::se1_b)], acc);
    requant(width, m(mult::se1), module(i, point::se1), true, h_.data());
    dense_acc(h_.data(), width, act[module(i, point::se1)].zero_point, ts[pw(param::se2_w)], ts[pw(param::se2_b)], acc);
    requant(fch, m(mult::se2), module(i, point::se2), false, z_.data());

    const SigmoidTable& lut = qm.sigmoid_tables[i];
    for (std::size_t c = 0; c < fch; ++c) s_[c] = lut[static_cast<std::size_t>(z_[c] + 128)];
    record(module(i, point::gate), s_.data(), fch);

    // Excitation: e = f * s.
    const std::int32_t zs = act[module(i, point::gate)].zero_point;
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t c = 0; c < fch; ++c) acc[t * fch + c] = (f_[t * fch + c] - zf) * (s_[c] - zs);
    }
    requant(n, m(mult::mul), module(i, point::scaled), false, e_.data());

    const auto& tables = add_tables_[i];
    add_acc(a_.data(), tables[0], e_.data(), tables[1], n, acc);
    requant(n, m(mult::res_out), module(i, point::residual), false, u_.data());

    conv(u_.data(), len, fch, module(i, point::residual), pw(param::br1_w), 2);
    requant(half * fch, m(mult::br1), module(i, point::br1), true, b1_.data());
    conv(u_.data(), len, fch, module(i, point::residual), pw(param::br2_w), 2);
    requant(half * fch, m(mult::br2), module(i, point::br2), true, b2_.data());

    add_acc(b1_.data(), tables[2], b2_.data(), tables[3], half * fch, acc);
    requant(half * fch, m(mult::sum_out), module(i, point::out), false, a_.data());

    len = half;
    x_point = module(i, point::out);
  }

  // Head: int32 accumulator, converted to meters with S_in * S_w.
  const QTensor& hb = ts[param::head_b(cfg.modules)];
  std::int32_t head = 0;
  dense_acc(a_.data(), len * fch, act[x_point].zero_point, ts[param::head_w(cfg.modules)], hb, &head);
  if (trace) trace->head_accumulator = head;
  return dequantize(head, hb.params);
}

double forward_int8(const QuantizedModel& model, std::span<const std::int8_t> input, Int8Trace* trace) {
  Int8Engine engine(model);
  return engine.run(input, trace);
}

double predict_int8(const QuantizedModel& model, std::span<const double> cir) {
  const auto q = quantize_input(model, cir);
  return forward_int8(model, q, nullptr);
}

}  // namespace remnet::quant
