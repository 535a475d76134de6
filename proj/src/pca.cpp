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

#include "remnet/data/pca.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "remnet/common.hpp"
#include "remnet/rng.hpp"

namespace remnet::data {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize_unit(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  for (double& x : v) x /= n;
}

// y = C v for a dense symmetric matrix stored row-major.
void matvec(const std::vector<double>& c, std::size_t d, const std::vector<double>& v, std::vector<double>& y) {
  for (std::size_t i = 0; i < d; ++i) y[i] = dot({c.data() + i * d, d}, v);
}

void fix_sign(std::vector<double>& v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  }
  if (v[arg] < 0.0) {
    for (double& x : v) x = -x;
  }
}

}  // namespace

PcaResult pca_project(std::span<const std::vector<double>> rows, const PcaOptions& options) {
  const std::size_t n = rows.size();
  const std::size_t dims = options.dims;
  if (dims == 0) raise<ConfigError>("pca_project: dims must be positive");
  if (n < dims) raise<DataError>("pca_project: ", n, " samples is fewer than ", dims, " dimensions");
  const std::size_t d = rows[0].size();
  if (dims > d) raise<ConfigError>("pca_project: dims ", dims, " exceeds feature count ", d);
  for (const auto& r : rows) {
    if (r.size() != d) raise<ShapeError>("pca_project: ragged rows");
    check_finite<double>(r, "pca_project");
  }

  PcaResult out;
  out.mean.assign(d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += r[j];
  }
  for (double& m : out.mean) m /= static_cast<double>(n);

  // Upper triangle accumulated, then mirrored.
  std::vector<double> cov(d * d, 0.0);
  std::vector<double> centered(d);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = r[j] - out.mean[j];
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = centered[i];
      double* row = cov.data() + i * d;
      for (std::size_t j = i; j < d; ++j) row[j] += ci * centered[j];
    }
  }
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov[i * d + j] /= denom;
      cov[j * d + i] = cov[i * d + j];
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) total += cov[i * d + i];

  Rng rng(0x9CA5EEDULL);
  std::vector<double> v(d), y(d);
  for (std::size_t c = 0; c < dims; ++c) {
    for (double& x : v) x = rng.normal();
    normalize_unit(v);
    double lambda = 0.0;
    std::size_t it = 0;
    bool done = false;
    while (it < options.max_iterations && !done) {
      ++it;
      matvec(cov, d, v, y);
      const double norm = std::sqrt(dot(y, y));
      if (norm == 0.0) {
        // Remaining variance is zero; any orthogonal direction will do.
        done = true;
        break;
      }
      double delta = 0.0;
      const double sign = dot(y, v) < 0.0 ? -1.0 : 1.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double nv = y[i] / norm;
        delta = std::max(delta, std::abs(nv - sign * v[i]));
        v[i] = nv;
      }
      done = delta < options.tolerance;
    }
    if (!done) out.converged = false;
    matvec(cov, d, v, y);
    lambda = std::max(0.0, dot(v, y));
    fix_sign(v);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] -= lambda * v[i] * v[j];
    }
    out.components.push_back(v);
    out.eigenvalues.push_back(lambda);
    out.iterations.push_back(it);
  }

  // Power iteration finds the dominant remaining eigenvalue each round, but
  // near-ties can swap order; sort to keep the descending contract.
  std::vector<std::size_t> order(dims);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out.eigenvalues[a] > out.eigenvalues[b]; });
  PcaResult sorted = out;
  for (std::size_t c = 0; c < dims; ++c) {
    sorted.components[c] = out.components[order[c]];
    sorted.eigenvalues[c] = out.eigenvalues[order[c]];
    sorted.iterations[c] = out.iterations[order[c]];
  }
  out = std::move(sorted);
  out.explained_variance.resize(dims);
  for (std::size_t c = 0; c < dims; ++c) out.explained_variance[c] = total > 0.0 ? out.eigenvalues[c] / total : 0.0;

  out.projections.assign(n, std::vector<double>(dims));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = rows[r][j] - out.mean[j];
    for (std::size_t c = 0; c < dims; ++c) out.projections[r][c] = dot(centered, out.components[c]);
  }
  return out;
}

PcaResult pca_project(std::span<const CirSample> samples, const PcaOptions& options) {
  std::vector<std::vector<double>> rows;
  rows.reserve(samples.size());
  for (const CirSample& s : samples) rows.push_back(s.cir);
  return pca_project(rows, options);
}

void write_pca_csv(const std::filesystem::path& path, const PcaResult& pca, std::span<const CirSample> samples) {
  if (pca.projections.size() != samples.size()) raise<ShapeError>("write_pca_csv: projection and sample counts differ");
  std::ofstream out(path);
  if (!out) raise<DataError>("write_pca_csv: cannot open ", path.string());
  const std::size_t dims = pca.components.size();
  static constexpr const char* kAxes[] = {"x", "y", "z"};
  for (std::size_t c = 0; c < dims; ++c) out << (c < 3 ? std::string(kAxes[c]) : "pc" + std::to_string(c)) << ",";
  out << "env,obstacle\n";
  out.precision(10);
  for (std::size_t r = 0; r < samples.size(); ++r) {
    for (double v : pca.projections[r]) out << v << ",";
    out << to_string(samples[r].environment) << "," << to_string(samples[r].obstacle) << "\n";
  }
  if (!out) raise<DataError>("write_pca_csv: write failed for ", path.string());
}

}  // namespace remnet::data
