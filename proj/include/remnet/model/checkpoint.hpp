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

// Float checkpoint (.remn), little-endian:
//
//   "REMN" | version u16 | 8 x u32 config | tensor count u32 |
//   per tensor: name length u16, name, rank u8, dims u32 x rank, f32 payload
//
// Config order: K, F, N, r, first_kernel, body_kernel, branch2_kernel,
// dropout rate in micro-units. See docs/formats.md.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "remnet/binary_io.hpp"
#include "remnet/model/remnet.hpp"

namespace remnet {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  RemnetConfig config;
  ModelWeights weights;
};

void write_config_block(io::ByteWriter& out, const RemnetConfig& config);
RemnetConfig read_config_block(io::ByteReader& in);

std::vector<std::uint8_t> encode_checkpoint(const ModelWeights& weights, const RemnetConfig& config);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ModelWeights& weights, const RemnetConfig& config, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rounds every parameter to the nearest float32 value (what a save/load
// round trip produces).
ModelWeights round_to_float32(const ModelWeights& weights);

// Rounds every parameter to the nearest IEEE binary16 value (round to
// nearest even), kept in the float store. Used for the float16 variant.
ModelWeights round_to_float16(const ModelWeights& weights);

float round_float_to_half(float x);

}  // namespace remnet
