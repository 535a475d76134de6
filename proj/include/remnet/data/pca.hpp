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

// Principal components of CIR windows by power iteration with deflation.

#include <filesystem>
#include <span>
#include <vector>

#include "remnet/data/dataset.hpp"

namespace remnet::data {

struct PcaOptions {
  std::size_t dims = 3;
  double tolerance = 1e-9;
  std::size_t max_iterations = 10000;
};

struct PcaResult {
  std::vector<double> mean;
  // dims unit vectors, descending eigenvalue; sign fixed so the entry with
  // the largest magnitude is positive.
  std::vector<std::vector<double>> components;
  std::vector<double> eigenvalues;
  // Fraction of the total variance (covariance trace) per component.
  std::vector<double> explained_variance;
  std::vector<std::vector<double>> projections;  // rows x dims
  std::vector<std::size_t> iterations;
  bool converged = true;
};

PcaResult pca_project(std::span<const std::vector<double>> rows, const PcaOptions& options = {});
PcaResult pca_project(std::span<const CirSample> samples, const PcaOptions& options = {});

// Columns x,y,z (pc3, pc4, ... beyond three), env, obstacle.
void write_pca_csv(const std::filesystem::path& path, const PcaResult& pca, std::span<const CirSample> samples);

}  // namespace remnet::data
