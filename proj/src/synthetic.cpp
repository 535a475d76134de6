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

#include "remnet/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "remnet/common.hpp"
#include "remnet/rng.hpp"

namespace remnet::data {
namespace {

struct RoomModel {
  double weight;        // share of the generated set
  double delay_scale;   // mean reflection delay, samples
  std::size_t min_taps;
  std::size_t max_taps;
  double nlos_probability;
};

constexpr RoomModel kRooms[] = {
    {0.30, 35.0, 4, 11, 0.5},  // big_room
    {0.25, 25.0, 4, 11, 0.5},  // medium_room
    {0.30, 15.0, 4, 11, 0.5},  // small_room
    {0.075, 8.0, 1, 3, 0.1},   // outdoor
    {0.075, 30.0, 4, 11, 1.0}, // ttw
};

// Per obstacle: extra propagation delay in meters and first-path attenuation range.
struct Material {
  double bias;
  double min_gain;
  double max_gain;
};

constexpr Material kMaterials[] = {
    {0.0, 1.0, 1.0},    // none
    {0.15, 0.5, 0.65},  // aluminium
    {0.03, 0.55, 0.9},  // plastic
    {0.06, 0.55, 0.9},  // wood
    {0.05, 0.55, 0.9},  // glass
    {0.08, 0.55, 0.9},  // other
};

constexpr double kWallBias = 0.2;         // extra delay through a partition, m
constexpr double kDelaySlope = 0.003;     // m per sample of mean excess delay
constexpr double kAttenuationSlope = 0.3; // m per unit of lost first-path gain
constexpr double kPulseHalfWidth = 2.5;   // samples
constexpr double kMaxReflectionDelay = 140.0;

double pulse(double x) {
  if (std::abs(x) >= kPulseHalfWidth) return 0.0;
  const double c = std::cos(std::numbers::pi * x / (2.0 * kPulseHalfWidth));
  return c * c;
}

void add_path(std::vector<double>& trace, double position, double amplitude) {
  const auto lo = static_cast<std::ptrdiff_t>(std::ceil(position - kPulseHalfWidth));
  const auto hi = static_cast<std::ptrdiff_t>(std::floor(position + kPulseHalfWidth));
  for (std::ptrdiff_t t = std::max<std::ptrdiff_t>(lo, 0); t <= hi && t < static_cast<std::ptrdiff_t>(trace.size()); ++t) {
    trace[static_cast<std::size_t>(t)] += amplitude * pulse(static_cast<double>(t) - position);
  }
}

CirSample make_sample(const SyntheticOptions& opt, Rng& rng) {
  double pick = rng.uniform();
  std::size_t room = 0;
  while (room + 1 < std::size(kRooms) && pick >= kRooms[room].weight) pick -= kRooms[room++].weight;
  const RoomModel& rm = kRooms[room];

  CirSample s;
  s.environment = kEnvironments[room];
  s.los = !rng.bernoulli(rm.nlos_probability);
  if (s.los) {
    s.obstacle = Obstacle::none;
  } else if (s.environment == Environment::ttw) {
    s.obstacle = Obstacle::other;
  } else {
    s.obstacle = kObstacles[1 + rng.below(std::size(kObstacles) - 1)];
  }
  const Material& mat = kMaterials[static_cast<std::size_t>(s.obstacle)];
  const double gain = rng.uniform(mat.min_gain, mat.max_gain);

  std::vector<double> trace(opt.trace_length, 0.0);
  const double first = rng.uniform(20.0, 60.0);
  add_path(trace, first, gain);

  const std::size_t taps = rm.min_taps + rng.below(rm.max_taps - rm.min_taps + 1);
  double weighted_delay = 0.0;
  double weight = 0.0;
  for (std::size_t k = 0; k < taps; ++k) {
    const double delay = std::min(3.0 - rm.delay_scale * std::log1p(-rng.uniform()), kMaxReflectionDelay);
    const double amp = rng.uniform(0.15, 0.9) * std::exp(-delay / (4.0 * rm.delay_scale));
    add_path(trace, first + delay, amp);
    weighted_delay += amp * delay;
    weight += amp;
  }
  for (double& v : trace) v += std::abs(rng.normal(0.0, opt.noise_floor));

  const double mean_excess = weight > 0.0 ? weighted_delay / weight : 0.0;
  double error = kDelaySlope * mean_excess + rng.normal(0.0, opt.label_noise);
  if (!s.los) error += mat.bias + kAttenuationSlope * (1.0 - gain);
  if (s.environment == Environment::ttw) error += kWallBias;

  s.true_range = rng.uniform(1.0, 15.0);
  s.measured_range = s.true_range + error;
  s.cir = normalize_max_abs(window_cir(trace));
  return s;
}

}  // namespace

std::vector<CirSample> generate_synthetic(const SyntheticOptions& options) {
  if (options.trace_length < kWindowLength + 64) raise<ConfigError>("generate_synthetic: trace_length too short");
  std::vector<CirSample> out(options.count);
  for (std::size_t i = 0; i < options.count; ++i) {
    Rng rng(derive_seed(options.seed, i));
    out[i] = make_sample(options, rng);
  }
  return out;
}

}  // namespace remnet::data
