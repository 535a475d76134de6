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

#include "remnet/model/checkpoint.hpp"

#include <bit>
#include <cmath>

namespace remnet {
namespace {

constexpr char kMagic[] = "REMN";

std::uint16_t float_to_half_bits(float f) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(f);
  const std::uint32_t sign = (x >> 16) & 0x8000u;
  const std::uint32_t absx = x & 0x7FFFFFFFu;
  if (absx >= 0x7F800000u) return static_cast<std::uint16_t>(sign | 0x7C00u | (absx > 0x7F800000u ? 0x200u : 0u));
  if (absx >= 0x477FF000u) return static_cast<std::uint16_t>(sign | 0x7C00u);  // >= 65520 rounds to inf
  if (absx < 0x38800000u) {
    // Subnormal range: multiples of 2^-24, nearbyint rounds half to even.
    const float scaled = std::bit_cast<float>(absx) * 16777216.0f;
    return static_cast<std::uint16_t>(sign | static_cast<std::uint32_t>(std::nearbyint(scaled)));
  }
  const std::uint32_t exponent = (absx >> 23) - 127 + 15;
  const std::uint32_t mantissa = absx & 0x7FFFFFu;
  std::uint32_t h = (exponent << 10) | (mantissa >> 13);
  const std::uint32_t rest = mantissa & 0x1FFFu;
  if (rest > 0x1000u || (rest == 0x1000u && (h & 1u))) ++h;
  return static_cast<std::uint16_t>(sign | h);
}

float half_bits_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t exponent = (h >> 10) & 0x1Fu;
  const std::uint32_t mantissa = h & 0x3FFu;
  if (exponent == 0) {
    const float v = static_cast<float>(mantissa) * 0x1.0p-24f;
    return sign ? -v : v;
  }
  if (exponent == 31) return std::bit_cast<float>(sign | 0x7F800000u | (mantissa << 13));
  return std::bit_cast<float>(sign | ((exponent - 15 + 127) << 23) | (mantissa << 13));
}

}  // namespace

float round_float_to_half(float x) { return half_bits_to_float(float_to_half_bits(x)); }

void write_config_block(io::ByteWriter& out, const RemnetConfig& c) {
  out.u32(c.input_length);
  out.u32(c.filters);
  out.u32(c.modules);
  out.u32(c.se_reduction);
  out.u32(c.first_kernel);
  out.u32(c.body_kernel);
  out.u32(c.branch2_kernel);
  out.u32(static_cast<std::uint32_t>(std::llround(c.dropout_rate * 1e6)));
}

RemnetConfig read_config_block(io::ByteReader& in) {
  RemnetConfig c;
  c.input_length = in.u32();
  c.filters = in.u32();
  c.modules = in.u32();
  c.se_reduction = in.u32();
  c.first_kernel = in.u32();
  c.body_kernel = in.u32();
  c.branch2_kernel = in.u32();
  c.dropout_rate = static_cast<double>(in.u32()) / 1e6;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    raise<FormatError>("invalid config block: ", e.what());
  }
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const ModelWeights& weights, const RemnetConfig& config) {
  if (!weights.same_layout(remnet_layout(config))) raise<ShapeError>("encode_checkpoint: shape mismatch vs config");
  io::ByteWriter out;
  out.raw(std::string_view(kMagic, 4));
  out.u16(kCheckpointVersion);
  write_config_block(out, config);
  out.u32(static_cast<std::uint32_t>(weights.tensor_count()));
  for (const auto& p : weights.params()) {
    out.name(p.name);
    out.u8(static_cast<std::uint8_t>(p.value.rank()));
    for (auto d : p.value.shape()) out.u32(static_cast<std::uint32_t>(d));
    for (double v : p.value.values()) out.f32(static_cast<float>(v));
  }
  return out.bytes();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  io::ByteReader in(bytes);
  if (in.raw(4) != std::string_view(kMagic, 4)) raise<FormatError>("bad magic");
  const auto version = in.u16();
  if (version != kCheckpointVersion) {
    raise<FormatError>("version mismatch: file has ", version, ", reader supports ", kCheckpointVersion);
  }
  Checkpoint ck{read_config_block(in), {}};
  ck.weights = remnet_layout(ck.config);
  const auto count = in.u32();
  if (count != ck.weights.tensor_count()) {
    raise<FormatError>("shape mismatch: ", count, " tensors, config expects ", ck.weights.tensor_count());
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = in.name();
    const std::size_t rank = in.u8();
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = in.u32();
    if (name != ck.weights.name(i) || dims != ck.weights[i].shape()) {
      raise<FormatError>("shape mismatch at tensor ", i, " '", name, "' vs expected '", ck.weights.name(i), "' ",
                         ck.weights[i].shape_string());
    }
    for (auto& v : ck.weights[i].storage()) v = static_cast<double>(in.f32());
  }
  if (in.remaining() != 0) raise<FormatError>("trailing bytes after last tensor");
  return ck;
}

void save_checkpoint(const ModelWeights& weights, const RemnetConfig& config, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(weights, config));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

ModelWeights round_to_float32(const ModelWeights& weights) {
  ModelWeights out = weights;
  for (auto& p : out.params()) {
    for (auto& v : p.value.storage()) v = static_cast<double>(static_cast<float>(v));
  }
  return out;
}

ModelWeights round_to_float16(const ModelWeights& weights) {
  ModelWeights out = weights;
  for (auto& p : out.params()) {
    for (auto& v : p.value.storage()) v = static_cast<double>(round_float_to_half(static_cast<float>(v)));
  }
  return out;
}

}  // namespace remnet
