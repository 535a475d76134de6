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

#include "remnet/quant/qmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "remnet/binary_io.hpp"
#include "remnet/model/checkpoint.hpp"
#include "remnet/nn/layers.hpp"

namespace remnet::quant {
namespace {

constexpr char kMagic[] = "REMQ";
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kDtypeInt8 = 1;
constexpr std::uint8_t kDtypeInt32 = 2;

bool is_bias(std::size_t tensor_index) { return tensor_index % 2 == 1; }

double floor_for(double accumulator_scale) { return accumulator_scale / kMaxMultiplier; }

double weight_scale(const ModelWeights& w, std::size_t idx) { return weight_params(max_abs(w[idx].values())).scale; }

// Activation point feeding the layer that owns weight tensor `idx`.
std::size_t input_point_of(const RemnetConfig& config, std::size_t idx) {
  if (idx < 2) return point::kInput;
  const std::size_t n = config.modules;
  if (idx >= param::head_w(n)) return n == 0 ? point::kStem : point::module(n - 1, point::out);
  const std::size_t i = (idx - 2) / param::kPerModule;
  const auto slot = static_cast<param::ModuleSlot>((idx - 2) % param::kPerModule);
  const std::size_t module_input = i == 0 ? point::kStem : point::module(i - 1, point::out);
  switch (slot) {
    case param::body_w:
    case param::body_b:
      return module_input;
    case param::se1_w:
    case param::se1_b:
      return point::module(i, point::gap);
    case param::se2_w:
    case param::se2_b:
      return point::module(i, point::se1);
    default:
      return point::module(i, point::residual);
  }
}

FixedPointMultiplier multiplier(double m, const char* what) {
  if (!(m < 1.0)) raise<ConfigError>("requantization multiplier for ", what, " is ", m, " (must be < 1)");
  return decompose_multiplier(m);
}

}  // namespace

void Range::observe(std::span<const double> values) {
  for (double v : values) {
    if (!seen) {
      min = max = v;
      seen = true;
    } else {
      min = std::min(min, v);
      max = std::max(max, v);
    }
  }
}

void Range::merge(const Range& other) {
  if (!other.seen) return;
  if (!seen) {
    *this = other;
    return;
  }
  min = std::min(min, other.min);
  max = std::max(max, other.max);
}

std::vector<QuantParams> derive_activation_params(const RemnetConfig& config, const ModelWeights& w,
                                                  std::span<const Range> ranges) {
  config.validate();
  if (ranges.size() != activation_point_count(config)) {
    raise<ShapeError>("derive_activation_params: ", ranges.size(), " ranges for ", activation_point_count(config),
                      " points");
  }
  std::vector<QuantParams> p(ranges.size());
  auto act = [&](std::size_t pt, double min_scale) {
    const Range& r = ranges[pt];
    return activation_params(r.seen ? r.min : 0.0, r.seen ? r.max : 0.0, min_scale);
  };
  const double shifted = std::ldexp(2.0, -kAddLeftShift);

  p[point::kInput] = act(point::kInput, kScaleFloor);
  p[point::kStem] = act(point::kStem, floor_for(p[point::kInput].scale * weight_scale(w, param::kStemW)));
  double s_x = p[point::kStem].scale;
  for (std::size_t i = 0; i < config.modules; ++i) {
    using point::module;
    const double s_f = (p[module(i, point::body)] =
                            act(module(i, point::body), floor_for(s_x * weight_scale(w, param::module(i, param::body_w)))))
                           .scale;
    const double s_g =
        (p[module(i, point::gap)] =
             act(module(i, point::gap), floor_for(s_f / static_cast<double>(config.length_at(i)))))
            .scale;
    const double s_h = (p[module(i, point::se1)] =
                            act(module(i, point::se1), floor_for(s_g * weight_scale(w, param::module(i, param::se1_w)))))
                           .scale;
    p[module(i, point::se2)] =
        act(module(i, point::se2), floor_for(s_h * weight_scale(w, param::module(i, param::se2_w))));
    p[module(i, point::gate)] = gate_params();
    const double s_e =
        (p[module(i, point::scaled)] = act(module(i, point::scaled), floor_for(s_f * gate_params().scale))).scale;
    const double s_u =
        (p[module(i, point::residual)] = act(module(i, point::residual), floor_for(shifted * std::max(s_x, s_e))))
            .scale;
    const double s_b1 = (p[module(i, point::br1)] =
                             act(module(i, point::br1), floor_for(s_u * weight_scale(w, param::module(i, param::br1_w)))))
                            .scale;
    const double s_b2 = (p[module(i, point::br2)] =
                             act(module(i, point::br2), floor_for(s_u * weight_scale(w, param::module(i, param::br2_w)))))
                            .scale;
    s_x = (p[module(i, point::out)] = act(module(i, point::out), floor_for(shifted * std::max(s_b1, s_b2)))).scale;
  }
  return p;
}

QuantizedModel export_quantized(const RemnetConfig& config, const ModelWeights& w, std::span<const Range> ranges) {
  if (!w.same_layout(remnet_layout(config))) raise<ShapeError>("export_quantized: weights do not match config");
  QuantizedModel m;
  m.config = config;
  m.activations = derive_activation_params(config, w, ranges);

  m.tensors.resize(w.tensor_count());
  for (std::size_t idx = 0; idx < w.tensor_count(); ++idx) {
    QTensor& t = m.tensors[idx];
    t.name = w.name(idx);
    t.shape = w[idx].shape();
    const auto values = w[idx].values();
    if (is_bias(idx)) {
      const double s_in = m.activations[input_point_of(config, idx)].scale;
      t.wide = true;
      t.params = bias_params(s_in * m.tensors[idx - 1].params.scale);
      t.q32.resize(values.size());
      for (std::size_t k = 0; k < values.size(); ++k) t.q32[k] = quantize(values[k], t.params);
    } else {
      t.params = weight_params(max_abs(values));
      t.q8.resize(values.size());
      for (std::size_t k = 0; k < values.size(); ++k) t.q8[k] = static_cast<std::int8_t>(quantize(values[k], t.params));
    }
  }

  const auto& a = m.activations;
  auto ws = [&](std::size_t idx) { return m.tensors[idx].params.scale; };
  const double shifted = std::ldexp(1.0, kAddLeftShift);
  m.multipliers.resize(mult::count(config.modules));
  m.multipliers[mult::kStem] =
      multiplier(a[point::kInput].scale * ws(param::kStemW) / a[point::kStem].scale, "stem");
  double s_x = a[point::kStem].scale;
  for (std::size_t i = 0; i < config.modules; ++i) {
    using point::module;
    auto s = [&](point::ModuleSlot slot) { return a[module(i, slot)].scale; };
    auto& mm = m.multipliers;
    auto at = [&](mult::ModuleSlot slot) -> FixedPointMultiplier& { return mm[mult::module(i, slot)]; };
    at(mult::body) = multiplier(s_x * ws(param::module(i, param::body_w)) / s(point::body), "body");
    at(mult::gap) = multiplier(s(point::body) / (static_cast<double>(config.length_at(i)) * s(point::gap)), "gap");
    at(mult::se1) = multiplier(s(point::gap) * ws(param::module(i, param::se1_w)) / s(point::se1), "se1");
    at(mult::se2) = multiplier(s(point::se1) * ws(param::module(i, param::se2_w)) / s(point::se2), "se2");
    at(mult::mul) = multiplier(s(point::body) * s(point::gate) / s(point::scaled), "gate product");
    const double res_max = std::max(s_x, s(point::scaled));
    at(mult::res_x) = multiplier(s_x / (2.0 * res_max), "residual input");
    at(mult::res_e) = multiplier(s(point::scaled) / (2.0 * res_max), "residual branch");
    at(mult::res_out) = multiplier(2.0 * res_max / (shifted * s(point::residual)), "residual output");
    at(mult::br1) = multiplier(s(point::residual) * ws(param::module(i, param::br1_w)) / s(point::br1), "branch 1");
    at(mult::br2) = multiplier(s(point::residual) * ws(param::module(i, param::br2_w)) / s(point::br2), "branch 2");
    const double sum_max = std::max(s(point::br1), s(point::br2));
    at(mult::sum_a) = multiplier(s(point::br1) / (2.0 * sum_max), "branch sum a");
    at(mult::sum_b) = multiplier(s(point::br2) / (2.0 * sum_max), "branch sum b");
    at(mult::sum_out) = multiplier(2.0 * sum_max / (shifted * s(point::out)), "branch sum output");
    s_x = s(point::out);
  }
  m.rebuild_tables();
  m.validate();
  return m;
}

void QuantizedModel::rebuild_tables() {
  sigmoid_tables.assign(config.modules, SigmoidTable{});
  for (std::size_t i = 0; i < config.modules; ++i) {
    const QuantParams& pz = activations.at(point::module(i, point::se2));
    const QuantParams& ps = activations.at(point::module(i, point::gate));
    for (int q = -128; q <= 127; ++q) {
      const double s = nn::detail::sigmoid_scalar(dequantize(q, pz));
      sigmoid_tables[i][static_cast<std::size_t>(q + 128)] = static_cast<std::int8_t>(quantize(s, ps));
    }
  }
}

void QuantizedModel::validate() const {
  config.validate();
  const ModelWeights layout = remnet_layout(config);
  if (tensors.size() != layout.tensor_count()) raise<FormatError>("tensor count mismatch");
  for (std::size_t idx = 0; idx < tensors.size(); ++idx) {
    const QTensor& t = tensors[idx];
    if (t.name != layout.name(idx)) raise<FormatError>("tensor ", idx, " is '", t.name, "', expected '", layout.name(idx), "'");
    if (t.shape != layout[idx].shape()) raise<FormatError>("shape mismatch for ", t.name);
    if (t.wide != is_bias(idx)) raise<FormatError>("wrong dtype for ", t.name);
    if (t.size() != layout[idx].size()) raise<FormatError>("payload size mismatch for ", t.name);
    t.params.validate();
    if (!t.wide && t.params.zero_point != 0) raise<FormatError>("weight zero point must be 0 for ", t.name);
    if (!t.wide && std::find(t.q8.begin(), t.q8.end(), std::int8_t{-128}) != t.q8.end()) {
      raise<FormatError>("weight value -128 in ", t.name);
    }
  }
  if (activations.size() != activation_point_count(config)) raise<FormatError>("activation parameter count mismatch");
  for (const auto& p : activations) {
    p.validate();
    if (p.qmin != -128 || p.qmax != 127) raise<FormatError>("activation range must be int8");
  }
  for (std::size_t i = 0; i < config.modules; ++i) {
    if (!(activations[point::module(i, point::gate)] == gate_params())) raise<FormatError>("gate grid must be 1/256");
  }
  if (multipliers.size() != mult::count(config.modules)) raise<FormatError>("multiplier count mismatch");
  for (const auto& m : multipliers) {
    if (m.m0 < (1 << 30) || m.right_shift > kMaxRightShift) {
      raise<FormatError>("multiplier (", m.m0, ", ", int(m.right_shift), ") not normalized");
    }
  }
  // Worst-case int32 accumulator per output channel: |b| + 255 * sum |w|.
  for (std::size_t idx = 0; idx + 1 < tensors.size(); idx += 2) {
    const QTensor& wt = tensors[idx];
    const QTensor& bt = tensors[idx + 1];
    const std::size_t cout = wt.shape.back();
    for (std::size_t o = 0; o < cout; ++o) {
      std::int64_t bound = std::abs(static_cast<std::int64_t>(bt.q32[o]));
      for (std::size_t k = o; k < wt.q8.size(); k += cout) bound += 255 * std::abs(static_cast<std::int64_t>(wt.q8[k]));
      if (bound > std::numeric_limits<std::int32_t>::max()) raise<ConfigError>("int32 accumulator may overflow in ", wt.name);
    }
  }
}

ModelWeights QuantizedModel::dequantized_weights() const {
  ModelWeights w = remnet_layout(config);
  for (std::size_t idx = 0; idx < tensors.size(); ++idx) {
    auto v = w[idx].values();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = dequantize(tensors[idx].at(k), tensors[idx].params);
  }
  return w;
}

namespace {

class RangeTap : public ActivationTap {
 public:
  explicit RangeTap(std::vector<Range>& ranges) : ranges_(ranges) {}
  void on_activation(std::size_t pt, std::span<double> values, std::vector<std::uint8_t>&) override {
    ranges_[pt].observe(values);
  }

 private:
  std::vector<Range>& ranges_;
};

}  // namespace

std::vector<Range> collect_ranges(const RemnetConfig& config, const ModelWeights& weights,
                                  std::span<const std::span<const double>> calibration) {
  if (calibration.empty()) raise<DataError>("calibration set is empty");
  std::vector<Range> ranges(activation_point_count(config));
  RangeTap tap(ranges);
  Rng unused(0);
  for (const auto& x : calibration) forward(config, weights, x, Mode::infer, unused, &tap);
  return ranges;
}

QuantizedModel calibrate_ptq(const RemnetConfig& config, const ModelWeights& weights,
                             std::span<const std::span<const double>> calibration) {
  const auto ranges = collect_ranges(config, weights, calibration);
  return export_quantized(config, weights, ranges);
}

std::vector<std::uint8_t> encode_quantized(const QuantizedModel& m) {
  m.validate();
  io::ByteWriter out;
  out.raw(std::string_view(kMagic, 4));
  out.u16(kVersion);
  write_config_block(out, m.config);
  out.u32(static_cast<std::uint32_t>(m.tensors.size()));
  for (const QTensor& t : m.tensors) {
    out.name(t.name);
    out.u8(t.wide ? kDtypeInt32 : kDtypeInt8);
    out.u8(static_cast<std::uint8_t>(t.shape.size()));
    for (std::size_t d : t.shape) out.u32(static_cast<std::uint32_t>(d));
    out.f64(t.params.scale);
    out.i32(t.params.zero_point);
    if (t.wide) {
      for (std::int32_t v : t.q32) out.i32(v);
    } else {
      for (std::int8_t v : t.q8) out.u8(static_cast<std::uint8_t>(v));
    }
  }
  out.u32(static_cast<std::uint32_t>(m.activations.size()));
  for (const QuantParams& p : m.activations) {
    out.f64(p.scale);
    out.i32(p.zero_point);
  }
  out.u32(static_cast<std::uint32_t>(m.multipliers.size()));
  for (const FixedPointMultiplier& f : m.multipliers) {
    out.i32(f.m0);
    out.u8(f.right_shift);
  }
  return out.bytes();
}

QuantizedModel decode_quantized(const std::vector<std::uint8_t>& bytes) {
  io::ByteReader in(bytes);
  if (in.raw(4) != std::string_view(kMagic, 4)) raise<FormatError>("bad magic");
  if (in.u16() != kVersion) raise<FormatError>("version mismatch");
  QuantizedModel m;
  m.config = read_config_block(in);
  const ModelWeights layout = remnet_layout(m.config);
  const std::uint32_t count = in.u32();
  if (count != layout.tensor_count()) raise<FormatError>("shape mismatch: ", count, " tensors, expected ", layout.tensor_count());
  m.tensors.resize(count);
  for (QTensor& t : m.tensors) {
    t.name = in.name();
    const std::uint8_t dtype = in.u8();
    if (dtype != kDtypeInt8 && dtype != kDtypeInt32) raise<FormatError>("unknown dtype ", int(dtype), " for ", t.name);
    t.wide = dtype == kDtypeInt32;
    t.shape.resize(in.u8());
    std::size_t n = 1;
    for (auto& d : t.shape) {
      d = in.u32();
      n *= d;
    }
    const auto it = std::find_if(layout.params().begin(), layout.params().end(),
                                 [&](const Parameter& p) { return p.name == t.name; });
    if (it == layout.params().end() || it->value.shape() != t.shape) raise<FormatError>("shape mismatch for ", t.name);
    t.params = t.wide ? bias_params(1.0) : weight_params(1.0);
    t.params.scale = in.f64();
    t.params.zero_point = in.i32();
    if (t.wide) {
      t.q32.resize(n);
      for (auto& v : t.q32) v = in.i32();
    } else {
      t.q8.resize(n);
      for (auto& v : t.q8) v = static_cast<std::int8_t>(in.u8());
    }
  }
  m.activations.resize(in.u32());
  if (m.activations.size() != activation_point_count(m.config)) raise<FormatError>("activation parameter count mismatch");
  for (QuantParams& p : m.activations) {
    p.scale = in.f64();
    p.zero_point = in.i32();
  }
  m.multipliers.resize(in.u32());
  if (m.multipliers.size() != mult::count(m.config.modules)) raise<FormatError>("multiplier count mismatch");
  for (FixedPointMultiplier& f : m.multipliers) {
    f.m0 = in.i32();
    f.right_shift = in.u8();
  }
  if (in.remaining() != 0) raise<FormatError>("trailing bytes");
  try {
    m.validate();
  } catch (const ConfigError& e) {
    raise<FormatError>(e.what());
  }
  m.rebuild_tables();
  return m;
}

void save_quantized(const std::filesystem::path& path, const QuantizedModel& model) {
  io::write_file(path, encode_quantized(model));
}

QuantizedModel load_quantized(const std::filesystem::path& path) { return decode_quantized(io::read_file(path)); }

}  // namespace remnet::quant
