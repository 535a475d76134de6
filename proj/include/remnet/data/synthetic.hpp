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

// Synthetic multipath CIRs for offline runs. Each raw trace has a first path
// followed by exponentially decaying reflections; the range error grows with
// obstacle attenuation and with the mean excess delay of the reflections, so
// it can only be recovered from samples well after the first peak.

#include <cstdint>
#include <vector>

#include "remnet/data/dataset.hpp"

namespace remnet::data {

struct SyntheticOptions {
  std::size_t count = 4000;
  std::uint64_t seed = 1;
  std::size_t trace_length = 256;
  double noise_floor = 0.01;
  double label_noise = 0.005;  // meters
};

// Windowed and normalized samples; sample i depends only on (seed, i).
std::vector<CirSample> generate_synthetic(const SyntheticOptions& options = {});

}  // namespace remnet::data
