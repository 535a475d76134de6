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

// Range-based 3D positioning: damped Gauss-Newton least squares over anchor
// distances, plus the raw-vs-mitigated positioning experiment.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "remnet/data/dataset.hpp"

namespace remnet::loc {

using Point3 = std::array<double, 3>;

double distance(const Point3& a, const Point3& b);

struct AnchorSet {
  std::vector<Point3> anchors;

  std::size_t size() const { return anchors.size(); }
  Point3 centroid() const;
  // Throws ConfigError for fewer than 4 anchors or coincident anchors.
  void validate() const;
  // True when every anchor lies within `tolerance` meters of one plane.
  bool coplanar(double tolerance = 1e-6) const;
};

struct SolverOptions {
  double tolerance = 1e-9;  // step norm, meters
  std::size_t max_iterations = 100;
  std::optional<Point3> initial;  // centroid of the anchors when empty
  double initial_damping = 1e-3;
  // Damping is switched on above this condition number of J^T J.
  double max_condition = 1e12;
};

struct PositionFix {
  Point3 position{};
  std::size_t iterations = 0;
  double final_residual_norm = 0.0;
  double final_step_norm = 0.0;
  bool converged = false;
  std::vector<double> cost_history;  // cost after every accepted step, starting point first
  std::vector<std::string> warnings;
};

// Minimizes sum_i (|p - a_i| - d_i)^2. Pure Gauss-Newton until J^T J is
// ill-conditioned or a step raises the cost; then Levenberg damping with
// lambda x10 on a rejected step and /10 on an accepted one. An iterate that
// lands on an anchor is nudged by 1e-9 m per axis.
PositionFix gauss_newton_solve(const AnchorSet& anchors, std::span<const double> ranges,
                               const SolverOptions& options = {});

// --- positioning experiment -------------------------------------------------

struct Epoch {
  Point3 truth{};
  std::vector<double> ranges;             // one per anchor
  std::vector<std::vector<double>> cirs;  // optional, one window per anchor
};

struct Scenario {
  AnchorSet anchors;
  std::vector<Epoch> epochs;
};

// Predicted range error for one measurement; the corrected range is
// range - prediction.
using Mitigator = std::function<double(std::span<const double> cir)>;

struct ExperimentResult {
  double raw_position_mae = 0.0;
  double mitigated_position_mae = 0.0;
  double raw_range_mae = 0.0;
  double mitigated_range_mae = 0.0;
  std::vector<PositionFix> raw_fixes;
  std::vector<PositionFix> mitigated_fixes;
  std::size_t unconverged = 0;
};

// Without a mitigator the mitigated columns repeat the raw ones.
ExperimentResult position_experiment(const Scenario& scenario, const Mitigator& mitigator = {},
                                     const SolverOptions& options = {}, std::size_t threads = 1);

// Epochs inside a box; each anchor range takes the range error of a sample
// drawn from the NLoS pool for anchors listed in `nlos_anchors` and from the
// LoS pool otherwise, and carries that sample's CIR.
struct ScenarioOptions {
  std::size_t epochs = 200;
  Point3 room{10.0, 8.0, 3.0};
  std::vector<std::size_t> nlos_anchors;
  std::uint64_t seed = 1;
};

AnchorSet default_anchors(const Point3& room);
Scenario make_scenario(const AnchorSet& anchors, std::span<const data::CirSample> los_pool,
                       std::span<const data::CirSample> nlos_pool, const ScenarioOptions& options);

// Scenario CSV: an "anchor,x,y,z" block, then an "epoch,tx,ty,tz,r0,..,r{n-1}"
// block. CIRs, when present, live in a companion CSV with columns
// epoch,anchor,cir_0..cir_156.
Scenario read_scenario(const std::filesystem::path& path, const std::optional<std::filesystem::path>& cir_path = {});
void write_scenario(const std::filesystem::path& path, const Scenario& scenario,
                    const std::optional<std::filesystem::path>& cir_path = {});
void write_results_csv(const std::filesystem::path& path, const Scenario& scenario, const ExperimentResult& result);

}  // namespace remnet::loc
