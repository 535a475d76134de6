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

#include "remnet/loc/trilateration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "remnet/common.hpp"
#include "remnet/rng.hpp"
#include "remnet/train/trainer.hpp"

namespace remnet::loc {
namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

constexpr double kAnchorNudge = 1e-9;
constexpr double kMaxDamping = 1e12;

Point3 sub(const Point3& a, const Point3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot3(const Point3& a, const Point3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm3(const Point3& a) { return std::sqrt(dot3(a, a)); }
Point3 cross(const Point3& a, const Point3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Extended precision, so that steps near the minimum are not rejected on
// rounding noise in the cost.
long double cost_at(const AnchorSet& anchors, std::span<const double> ranges, const Point3& p) {
  long double c = 0.0L;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    long double sq = 0.0L;
    for (int k = 0; k < 3; ++k) {
      const long double d = static_cast<long double>(p[k]) - anchors.anchors[i][k];
      sq += d * d;
    }
    const long double r = std::sqrt(sq) - ranges[i];
    c += r * r;
  }
  return c;
}

// Eigenvalues of a symmetric 3x3 matrix (trigonometric closed form).
std::array<double, 3> symmetric_eigenvalues(const Mat3& a) {
  const double p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
  if (p1 == 0.0) {
    std::array<double, 3> d{a[0][0], a[1][1], a[2][2]};
    std::sort(d.begin(), d.end());
    return d;
  }
  const double q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
  const double p2 = (a[0][0] - q) * (a[0][0] - q) + (a[1][1] - q) * (a[1][1] - q) + (a[2][2] - q) * (a[2][2] - q) + 2 * p1;
  const double p = std::sqrt(p2 / 6.0);
  Mat3 b{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) b[i][j] = (a[i][j] - (i == j ? q : 0.0)) / p;
  }
  const double det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                     b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
  const double r = std::clamp(det / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2 * p * std::cos(phi);
  const double e3 = q + 2 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  const double e2 = 3 * q - e1 - e3;
  return {e3, e2, e1};
}

// Cholesky solve of a x = b; false when a is not positive definite.
bool cholesky_solve(const Mat3& a, const Point3& b, Point3& x) {
  Mat3 l{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[i][j];
      for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      if (i == j) {
        if (!(s > 0.0)) return false;
        l[i][i] = std::sqrt(s);
      } else {
        l[i][j] = s / l[j][j];
      }
    }
  }
  Point3 y{};
  for (int i = 0; i < 3; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l[i][k] * y[k];
    y[i] = s / l[i][i];
  }
  for (int i = 2; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < 3; ++k) s -= l[k][i] * x[k];
    x[i] = s / l[i][i];
  }
  return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
}

std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<double> parse_row(const std::string& line, std::size_t line_no, const std::filesystem::path& path) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const auto field = std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto v = parse_double(field);
    if (!v) raise<DataError>(path.string(), ":", line_no, ": non-numeric field '", field, "'");
    out.push_back(*v);
    if (comma == std::string::npos) return out;
    start = comma + 1;
  }
}

}  // namespace

double distance(const Point3& a, const Point3& b) { return norm3(sub(a, b)); }

Point3 AnchorSet::centroid() const {
  Point3 c{};
  for (const Point3& a : anchors) {
    for (int k = 0; k < 3; ++k) c[k] += a[k];
  }
  for (double& v : c) v /= static_cast<double>(anchors.size());
  return c;
}

void AnchorSet::validate() const {
  if (anchors.size() < 4) raise<ConfigError>("AnchorSet: at least 4 anchors required, got ", anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      if (!std::isfinite(anchors[i][k])) raise<ConfigError>("AnchorSet: anchor ", i, " is not finite");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (distance(anchors[i], anchors[j]) < 1e-9) raise<ConfigError>("AnchorSet: anchors ", j, " and ", i, " coincide");
    }
  }
}

bool AnchorSet::coplanar(double tolerance) const {
  if (anchors.size() < 4) return true;
  // Plane through the first anchor and the two directions spanning the widest triangle.
  const Point3& o = anchors[0];
  Point3 normal{};
  double best = 0.0;
  for (std::size_t i = 1; i < anchors.size(); ++i) {
    for (std::size_t j = i + 1; j < anchors.size(); ++j) {
      const Point3 n = cross(sub(anchors[i], o), sub(anchors[j], o));
      const double len = norm3(n);
      if (len > best) {
        best = len;
        normal = n;
      }
    }
  }
  if (best == 0.0) return true;  // collinear
  for (double& v : normal) v /= best;
  for (const Point3& a : anchors) {
    if (std::abs(dot3(sub(a, o), normal)) > tolerance) return false;
  }
  return true;
}

PositionFix gauss_newton_solve(const AnchorSet& anchors, std::span<const double> ranges, const SolverOptions& options) {
  anchors.validate();
  const std::size_t n = anchors.size();
  if (ranges.size() != n) raise<ConfigError>("gauss_newton_solve: ", ranges.size(), " ranges for ", n, " anchors");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(ranges[i]) || ranges[i] <= 0.0) raise<DataError>("gauss_newton_solve: range ", i, " must be > 0");
  }
  if (!(options.tolerance > 0.0)) raise<ConfigError>("gauss_newton_solve: tolerance must be positive");

  PositionFix fix;
  if (anchors.coplanar()) fix.warnings.push_back("anchors are coplanar; z is ambiguous up to reflection about their plane");

  Point3 p = options.initial.value_or(anchors.centroid());
  auto nudge_off_anchors = [&](Point3& q) {
    for (const Point3& a : anchors.anchors) {
      if (distance(q, a) < kAnchorNudge) {
        for (double& v : q) v += kAnchorNudge;
        fix.warnings.push_back("iterate coincided with an anchor; nudged by 1e-9 m");
      }
    }
  };
  nudge_off_anchors(p);
  long double cost = cost_at(anchors, ranges, p);
  fix.cost_history.push_back(static_cast<double>(cost));
  double lambda = 0.0;

  while (fix.iterations < options.max_iterations) {
    ++fix.iterations;
    Mat3 jtj{};
    Point3 jtr{};
    for (std::size_t i = 0; i < n; ++i) {
      const Point3 d = sub(p, anchors.anchors[i]);
      const double len = norm3(d);
      const Point3 row{d[0] / len, d[1] / len, d[2] / len};
      const double r = len - ranges[i];
      for (int a = 0; a < 3; ++a) {
        jtr[a] += row[a] * r;
        for (int b = 0; b < 3; ++b) jtj[a][b] += row[a] * row[b];
      }
    }
    const auto ev = symmetric_eigenvalues(jtj);
    if (lambda == 0.0 && !(ev[0] > ev[2] / options.max_condition)) lambda = options.initial_damping;

    // Inner loop: raise damping until a step does not increase the cost.
    bool accepted = false;
    Point3 step{};
    while (!accepted) {
      Mat3 a = jtj;
      for (int k = 0; k < 3; ++k) a[k][k] += lambda;
      const Point3 rhs{-jtr[0], -jtr[1], -jtr[2]};
      if (!cholesky_solve(a, rhs, step)) {
        if (lambda >= kMaxDamping) break;
        lambda = lambda == 0.0 ? options.initial_damping : lambda * 10.0;
        continue;
      }
      Point3 trial{p[0] + step[0], p[1] + step[1], p[2] + step[2]};
      nudge_off_anchors(trial);
      const long double trial_cost = cost_at(anchors, ranges, trial);
      if (trial_cost <= cost) {
        p = trial;
        cost = trial_cost;
        accepted = true;
        if (lambda > 0.0) lambda = lambda / 10.0 < 1e-12 ? 0.0 : lambda / 10.0;
      } else if (norm3(step) <= options.tolerance) {
        // Rounding noise at the minimum; the step is below tolerance anyway.
        break;
      } else {
        if (lambda >= kMaxDamping) break;
        lambda = lambda == 0.0 ? options.initial_damping : lambda * 10.0;
      }
    }
    fix.final_step_norm = accepted ? norm3(step) : 0.0;
    if (accepted) fix.cost_history.push_back(static_cast<double>(cost));
    if (!accepted && norm3(step) > options.tolerance) {
      fix.warnings.push_back("normal equations singular or no descent after maximum damping");
      break;
    }
    if (!accepted || norm3(step) <= options.tolerance) {
      fix.converged = true;
      break;
    }
  }
  fix.position = p;
  fix.final_residual_norm = static_cast<double>(std::sqrt(cost));
  return fix;
}

// --- experiment -------------------------------------------------------------

ExperimentResult position_experiment(const Scenario& scenario, const Mitigator& mitigator, const SolverOptions& options,
                                     std::size_t threads) {
  scenario.anchors.validate();
  const std::size_t n = scenario.anchors.size();
  const std::size_t m = scenario.epochs.size();
  if (m == 0) raise<DataError>("position_experiment: no epochs");
  for (const Epoch& e : scenario.epochs) {
    if (e.ranges.size() != n) raise<DataError>("position_experiment: epoch with ", e.ranges.size(), " ranges, expected ", n);
    if (mitigator && e.cirs.size() != n) raise<DataError>("position_experiment: mitigation needs one CIR per range");
  }

  ExperimentResult out;
  out.raw_fixes.resize(m);
  out.mitigated_fixes.resize(m);
  std::vector<double> raw_range_err(m), mit_range_err(m);
  parallel_for(m, threads, [&](std::size_t k) {
    const Epoch& e = scenario.epochs[k];
    std::vector<double> corrected = e.ranges;
    double raw_err = 0.0;
    double mit_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mitigator) corrected[i] = e.ranges[i] - mitigator(e.cirs[i]);
      const double truth = distance(e.truth, scenario.anchors.anchors[i]);
      raw_err += std::abs(e.ranges[i] - truth);
      mit_err += std::abs(corrected[i] - truth);
    }
    raw_range_err[k] = raw_err / static_cast<double>(n);
    mit_range_err[k] = mit_err / static_cast<double>(n);
    out.raw_fixes[k] = gauss_newton_solve(scenario.anchors, e.ranges, options);
    // A correction can push a short range to zero or below; clamp so the
    // solver precondition holds.
    for (double& r : corrected) r = std::max(r, 1e-6);
    out.mitigated_fixes[k] = mitigator ? gauss_newton_solve(scenario.anchors, corrected, options) : out.raw_fixes[k];
  });

  for (std::size_t k = 0; k < m; ++k) {
    const Point3& t = scenario.epochs[k].truth;
    out.raw_position_mae += distance(out.raw_fixes[k].position, t);
    out.mitigated_position_mae += distance(out.mitigated_fixes[k].position, t);
    out.raw_range_mae += raw_range_err[k];
    out.mitigated_range_mae += mit_range_err[k];
    out.unconverged += !out.raw_fixes[k].converged;
    if (mitigator) out.unconverged += !out.mitigated_fixes[k].converged;
  }
  const auto dm = static_cast<double>(m);
  out.raw_position_mae /= dm;
  out.mitigated_position_mae /= dm;
  out.raw_range_mae /= dm;
  out.mitigated_range_mae /= dm;
  return out;
}

AnchorSet default_anchors(const Point3& room) {
  // Room corners at alternating heights, so the set is not coplanar.
  const double lo = 0.2 * room[2];
  const double hi = 0.9 * room[2];
  return {{{0.0, 0.0, hi}, {room[0], 0.0, lo}, {room[0], room[1], hi}, {0.0, room[1], lo}}};
}

Scenario make_scenario(const AnchorSet& anchors, std::span<const data::CirSample> los_pool,
                       std::span<const data::CirSample> nlos_pool, const ScenarioOptions& options) {
  anchors.validate();
  for (std::size_t a : options.nlos_anchors) {
    if (a >= anchors.size()) raise<ConfigError>("make_scenario: NLoS anchor index ", a, " out of range");
  }
  const bool any_los = options.nlos_anchors.size() < anchors.size();
  if ((any_los && los_pool.empty()) || (!options.nlos_anchors.empty() && nlos_pool.empty())) {
    raise<DataError>("make_scenario: empty sample pool");
  }
  Scenario s;
  s.anchors = anchors;
  Rng rng(options.seed);
  constexpr double kMargin = 0.5;
  for (std::size_t e = 0; e < options.epochs; ++e) {
    Epoch ep;
    for (int k = 0; k < 3; ++k) ep.truth[k] = rng.uniform(kMargin, options.room[k] - kMargin);
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const bool nlos = std::find(options.nlos_anchors.begin(), options.nlos_anchors.end(), a) != options.nlos_anchors.end();
      const auto& pool = nlos ? nlos_pool : los_pool;
      const data::CirSample& sample = pool[rng.below(pool.size())];
      const double truth = distance(ep.truth, anchors.anchors[a]);
      ep.ranges.push_back(std::max(truth + sample.label(), 1e-3));
      ep.cirs.push_back(sample.cir);
    }
    s.epochs.push_back(std::move(ep));
  }
  return s;
}

Scenario read_scenario(const std::filesystem::path& path, const std::optional<std::filesystem::path>& cir_path) {
  std::ifstream in(path);
  if (!in) raise<DataError>("read_scenario: cannot open ", path.string());
  enum class Block { none, anchors, epochs } block = Block::none;
  Scenario s;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    if (line.rfind("anchor", 0) == 0) {
      block = Block::anchors;
      continue;
    }
    if (line.rfind("epoch", 0) == 0) {
      block = Block::epochs;
      continue;
    }
    const auto v = parse_row(line, line_no, path);
    if (block == Block::anchors) {
      if (v.size() != 4) raise<DataError>(path.string(), ":", line_no, ": anchor rows need id,x,y,z");
      s.anchors.anchors.push_back({v[1], v[2], v[3]});
    } else if (block == Block::epochs) {
      const std::size_t n = s.anchors.size();
      if (v.size() != 4 + n) raise<DataError>(path.string(), ":", line_no, ": epoch rows need id,tx,ty,tz and ", n, " ranges");
      Epoch e;
      e.truth = {v[1], v[2], v[3]};
      e.ranges.assign(v.begin() + 4, v.end());
      s.epochs.push_back(std::move(e));
    } else {
      raise<DataError>(path.string(), ":", line_no, ": data before an anchor or epoch header");
    }
  }
  s.anchors.validate();
  if (s.epochs.empty()) raise<DataError>("read_scenario: no epochs in ", path.string());

  if (cir_path) {
    std::ifstream cin(*cir_path);
    if (!cin) raise<DataError>("read_scenario: cannot open ", cir_path->string());
    std::getline(cin, line);  // header
    std::size_t row = 1;
    for (auto& e : s.epochs) e.cirs.assign(s.anchors.size(), {});
    while (std::getline(cin, line)) {
      ++row;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto v = parse_row(line, row, *cir_path);
      if (v.size() != 2 + data::kWindowLength) raise<DataError>(cir_path->string(), ":", row, ": expected epoch,anchor and 157 CIR values");
      const auto e = static_cast<std::size_t>(v[0]);
      const auto a = static_cast<std::size_t>(v[1]);
      if (e >= s.epochs.size() || a >= s.anchors.size()) raise<DataError>(cir_path->string(), ":", row, ": epoch or anchor out of range");
      s.epochs[e].cirs[a].assign(v.begin() + 2, v.end());
    }
    for (std::size_t e = 0; e < s.epochs.size(); ++e) {
      for (std::size_t a = 0; a < s.anchors.size(); ++a) {
        if (s.epochs[e].cirs[a].empty()) raise<DataError>("read_scenario: no CIR for epoch ", e, " anchor ", a);
      }
    }
  }
  return s;
}

void write_scenario(const std::filesystem::path& path, const Scenario& scenario,
                    const std::optional<std::filesystem::path>& cir_path) {
  std::ofstream out(path);
  if (!out) raise<DataError>("write_scenario: cannot open ", path.string());
  out.precision(17);
  out << "anchor,x,y,z\n";
  for (std::size_t i = 0; i < scenario.anchors.size(); ++i) {
    const auto& a = scenario.anchors.anchors[i];
    out << i << "," << a[0] << "," << a[1] << "," << a[2] << "\n";
  }
  out << "epoch,tx,ty,tz";
  for (std::size_t i = 0; i < scenario.anchors.size(); ++i) out << ",r" << i;
  out << "\n";
  for (std::size_t k = 0; k < scenario.epochs.size(); ++k) {
    const auto& e = scenario.epochs[k];
    out << k << "," << e.truth[0] << "," << e.truth[1] << "," << e.truth[2];
    for (double r : e.ranges) out << "," << r;
    out << "\n";
  }
  if (!out) raise<DataError>("write_scenario: write failed for ", path.string());
  if (!cir_path) return;
  std::ofstream cout(*cir_path);
  if (!cout) raise<DataError>("write_scenario: cannot open ", cir_path->string());
  cout.precision(17);
  cout << "epoch,anchor";
  for (std::size_t j = 0; j < data::kWindowLength; ++j) cout << ",cir_" << j;
  cout << "\n";
  for (std::size_t k = 0; k < scenario.epochs.size(); ++k) {
    for (std::size_t a = 0; a < scenario.epochs[k].cirs.size(); ++a) {
      cout << k << "," << a;
      for (double v : scenario.epochs[k].cirs[a]) cout << "," << v;
      cout << "\n";
    }
  }
  if (!cout) raise<DataError>("write_scenario: write failed for ", cir_path->string());
}

void write_results_csv(const std::filesystem::path& path, const Scenario& scenario, const ExperimentResult& result) {
  std::ofstream out(path);
  if (!out) raise<DataError>("write_results_csv: cannot open ", path.string());
  out.precision(10);
  out << "epoch,tx,ty,tz,raw_x,raw_y,raw_z,raw_error,raw_converged,mit_x,mit_y,mit_z,mit_error,mit_converged\n";
  for (std::size_t k = 0; k < scenario.epochs.size(); ++k) {
    const Point3& t = scenario.epochs[k].truth;
    const PositionFix& r = result.raw_fixes[k];
    const PositionFix& m = result.mitigated_fixes[k];
    out << k << "," << t[0] << "," << t[1] << "," << t[2] << "," << r.position[0] << "," << r.position[1] << ","
        << r.position[2] << "," << distance(r.position, t) << "," << r.converged << "," << m.position[0] << ","
        << m.position[1] << "," << m.position[2] << "," << distance(m.position, t) << "," << m.converged << "\n";
  }
  if (!out) raise<DataError>("write_results_csv: write failed for ", path.string());
}

}  // namespace remnet::loc
