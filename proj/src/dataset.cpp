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

#include "remnet/data/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "remnet/common.hpp"
#include "remnet/rng.hpp"

namespace remnet::data {
namespace {

constexpr std::string_view kEnvNames[] = {"big_room", "medium_room", "small_room", "outdoor", "ttw"};
constexpr std::string_view kObstacleNames[] = {"none", "aluminium", "plastic", "wood", "glass", "other"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

bool parse_flag(std::string_view s) {
  const std::string v = lower(s);
  if (v == "1" || v == "true" || v == "los" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "nlos" || v == "no") return false;
  raise<DataError>("invalid los flag '", s, "'");
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

std::string_view to_string(Environment env) { return kEnvNames[static_cast<std::size_t>(env)]; }
std::string_view to_string(Obstacle obstacle) { return kObstacleNames[static_cast<std::size_t>(obstacle)]; }

Environment parse_environment(std::string_view text) {
  const std::string v = lower(trim(text));
  for (Environment e : kEnvironments) {
    if (v == to_string(e)) return e;
  }
  raise<DataError>("unknown environment '", text, "'");
}

Obstacle parse_obstacle(std::string_view text) {
  std::string v = lower(trim(text));
  if (v == "los" || v.empty()) v = "none";
  if (v == "aluminum") v = "aluminium";
  for (Obstacle o : kObstacles) {
    if (v == to_string(o)) return o;
  }
  raise<DataError>("unknown obstacle '", text, "'");
}

void validate_sample(const CirSample& s) {
  if (s.cir.size() != kWindowLength) raise<DataError>("cir length ", s.cir.size(), " != ", kWindowLength);
  for (std::size_t i = 0; i < s.cir.size(); ++i) {
    if (!std::isfinite(s.cir[i])) raise<DataError>("cir_", i, " is not finite");
    if (s.cir[i] < 0.0) raise<DataError>("cir_", i, " is negative (", s.cir[i], ")");
  }
  if (!std::isfinite(s.true_range) || s.true_range <= 0.0) raise<DataError>("true range must be > 0, got ", s.true_range);
  if (!std::isfinite(s.measured_range)) raise<DataError>("measured range is not finite");
  if (!(std::abs(s.label()) < kLabelBound)) {
    raise<DataError>("range error ", s.label(), " m outside the +-", kLabelBound, " m sanity bound");
  }
  if (s.los && s.obstacle != Obstacle::none) raise<DataError>("los sample with obstacle ", to_string(s.obstacle));
}

std::size_t first_peak_index(std::span<const double> raw, double peak_fraction) {
  if (raw.empty()) raise<DataError>("window_cir: empty trace");
  if (!(peak_fraction > 0.0 && peak_fraction <= 1.0)) raise<ConfigError>("window_cir: peak fraction must be in (0, 1]");
  check_finite(raw, "window_cir");
  const double peak = *std::max_element(raw.begin(), raw.end());
  if (!(peak > 0.0)) raise<DataError>("window_cir: all-zero trace");
  const double threshold = peak_fraction * peak;
  std::size_t i = 0;
  while (raw[i] < threshold) ++i;
  return i;
}

std::vector<double> window_cir(std::span<const double> raw, double peak_fraction) {
  const std::size_t peak = first_peak_index(raw, peak_fraction);
  std::vector<double> out(kWindowLength, 0.0);
  for (std::size_t j = 0; j < kWindowLength; ++j) {
    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(peak + j) - static_cast<std::ptrdiff_t>(kPrePeak);
    if (src >= 0 && static_cast<std::size_t>(src) < raw.size()) out[j] = raw[static_cast<std::size_t>(src)];
  }
  return out;
}

std::vector<double> normalize_max_abs(std::span<const double> cir) {
  double m = 0.0;
  for (double v : cir) m = std::max(m, std::abs(v));
  if (!(m > 0.0) || !std::isfinite(m)) raise<DataError>("normalize: zero or non-finite trace");
  std::vector<double> out(cir.begin(), cir.end());
  if (m == 1.0) return out;
  for (double& v : out) v /= m;
  return out;
}

CirSample normalize(CirSample sample) {
  sample.cir = normalize_max_abs(sample.cir);
  return sample;
}

std::vector<double> truncate_to_k(std::span<const double> cir, std::size_t k) {
  if (k == 0 || k > cir.size()) raise<ConfigError>("truncate_to_k: K=", k, " outside [1, ", cir.size(), "]");
  return {cir.begin(), cir.begin() + static_cast<std::ptrdiff_t>(k)};
}

// --- CSV -------------------------------------------------------------------

std::string ImportResult::report() const {
  std::ostringstream os;
  os << "rows read: " << rows_read << "\naccepted: " << samples.size() << "\nrejected: " << errors.size() << "\n";
  for (const RowError& e : errors) os << "row " << e.row << ": " << e.message << "\n";
  return os.str();
}

ImportResult import_csv(std::istream& in, const ColumnMap& columns) {
  std::string header_line;
  if (!std::getline(in, header_line)) raise<DataError>("import_csv: empty input, header expected");
  const auto header = split_fields(header_line);

  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < header.size(); ++i) index.emplace(std::string(header[i]), i);
  auto require = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) raise<DataError>("import_csv: missing column '", name, "'");
    return it->second;
  };
  const std::size_t c_meas = require(columns.measured_range);
  const std::size_t c_true = require(columns.true_range);
  const std::size_t c_env = require(columns.environment);
  const std::size_t c_obs = require(columns.obstacle);
  const std::size_t c_los = require(columns.los);

  // CIR columns are <prefix>0, <prefix>1, ... without gaps.
  std::vector<std::size_t> c_cir;
  for (std::size_t j = 0;; ++j) {
    const auto it = index.find(columns.cir_prefix + std::to_string(j));
    if (it == index.end()) break;
    c_cir.push_back(it->second);
  }
  if (c_cir.empty()) raise<DataError>("import_csv: missing column '", columns.cir_prefix, "0'");
  const bool windowed = c_cir.size() == kWindowLength && !columns.force_raw;

  ImportResult result;
  std::string line;
  std::size_t line_no = 1;
  std::vector<double> trace(c_cir.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++result.rows_read;
    try {
      const auto fields = split_fields(line);
      if (fields.size() != header.size()) {
        raise<DataError>("expected ", header.size(), " fields, found ", fields.size());
      }
      auto number = [&](std::size_t col) {
        const auto v = parse_number(fields[col]);
        if (!v) raise<DataError>("non-numeric value '", fields[col], "' in column '", header[col], "'");
        return *v;
      };
      CirSample s;
      s.measured_range = number(c_meas);
      s.true_range = number(c_true);
      s.environment = parse_environment(fields[c_env]);
      s.obstacle = parse_obstacle(fields[c_obs]);
      s.los = parse_flag(fields[c_los]);
      for (std::size_t j = 0; j < c_cir.size(); ++j) trace[j] = number(c_cir[j]);
      s.cir = windowed ? trace : window_cir(trace, columns.peak_fraction);
      if (columns.normalize) s = normalize(std::move(s));
      validate_sample(s);
      result.samples.push_back(std::move(s));
    } catch (const Error& e) {
      result.errors.push_back({line_no, e.what()});
    }
  }
  return result;
}

ImportResult import_csv(const std::filesystem::path& path, const ColumnMap& columns) {
  std::ifstream in(path);
  if (!in) raise<DataError>("import_csv: cannot open ", path.string());
  return import_csv(in, columns);
}

void write_csv(std::ostream& out, std::span<const CirSample> samples) {
  std::string line = "d_meas,d_true,env,obstacle,los";
  for (std::size_t j = 0; j < kWindowLength; ++j) line += ",cir_" + std::to_string(j);
  out << line << "\n";
  for (const CirSample& s : samples) {
    line.clear();
    append_number(line, s.measured_range);
    line += ',';
    append_number(line, s.true_range);
    line += ',';
    line += to_string(s.environment);
    line += ',';
    line += to_string(s.obstacle);
    line += s.los ? ",1" : ",0";
    for (double v : s.cir) {
      line += ',';
      append_number(line, v);
    }
    out << line << "\n";
  }
}

void write_csv(const std::filesystem::path& path, std::span<const CirSample> samples) {
  std::ofstream out(path);
  if (!out) raise<DataError>("write_csv: cannot open ", path.string());
  write_csv(out, samples);
  if (!out) raise<DataError>("write_csv: write failed for ", path.string());
}

// --- splits -----------------------------------------------------------------

SplitPolicy SplitPolicy::by_environment(Environment env) {
  SplitPolicy p;
  p.kind = Kind::by_environment;
  p.environment = env;
  return p;
}

SplitPolicy SplitPolicy::by_obstacle(Obstacle obstacle) {
  SplitPolicy p;
  p.kind = Kind::by_obstacle;
  p.obstacle = obstacle;
  return p;
}

SplitPolicy SplitPolicy::stratified(double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) raise<ConfigError>("stratified split: fraction must be in [0, 1]");
  SplitPolicy p;
  p.kind = Kind::stratified;
  p.fraction = fraction;
  p.seed = seed;
  return p;
}

std::string SplitPolicy::describe() const {
  switch (kind) {
    case Kind::paper_default:
      return "train: big_room + small_room; test: medium_room; outdoor and ttw excluded";
    case Kind::by_environment:
      return detail::concat("train: ", to_string(environment), "; test: all other environments");
    case Kind::by_obstacle:
      return detail::concat("train: obstacle ", to_string(obstacle), "; test: all other obstacles");
    case Kind::stratified:
      return detail::concat("stratified by environment and obstacle, train fraction ", fraction, ", seed ", seed);
  }
  return {};
}

DatasetSplit split(std::span<const CirSample> samples, const SplitPolicy& policy) {
  DatasetSplit out;
  out.policy = policy.describe();
  using Kind = SplitPolicy::Kind;
  if (policy.kind != Kind::stratified) {
    for (const CirSample& s : samples) {
      switch (policy.kind) {
        case Kind::paper_default:
          if (s.environment == Environment::medium_room) {
            out.test.push_back(s);
          } else if (s.environment == Environment::big_room || s.environment == Environment::small_room) {
            out.train.push_back(s);
          }
          break;
        case Kind::by_environment:
          (s.environment == policy.environment ? out.train : out.test).push_back(s);
          break;
        case Kind::by_obstacle:
          (s.obstacle == policy.obstacle ? out.train : out.test).push_back(s);
          break;
        case Kind::stratified:
          break;
      }
    }
    return out;
  }

  // Strata in enum order; each gets its own seeded shuffle, so the result does
  // not depend on how strata interleave in the input.
  constexpr std::size_t kObstacleCount = std::size(kObstacles);
  std::vector<std::vector<std::size_t>> strata(std::size(kEnvironments) * kObstacleCount);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    strata[static_cast<std::size_t>(s.environment) * kObstacleCount + static_cast<std::size_t>(s.obstacle)].push_back(i);
  }
  std::vector<char> in_train(samples.size(), 0);
  for (std::size_t k = 0; k < strata.size(); ++k) {
    auto& idx = strata[k];
    Rng rng(derive_seed(policy.seed, k));
    rng.shuffle(idx);
    const auto n_train = static_cast<std::size_t>(std::llround(policy.fraction * static_cast<double>(idx.size())));
    for (std::size_t j = 0; j < n_train; ++j) in_train[idx[j]] = 1;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) (in_train[i] ? out.train : out.test).push_back(samples[i]);
  return out;
}

std::vector<CirSample> filter_environment(std::span<const CirSample> samples, Environment env) {
  std::vector<CirSample> out;
  for (const CirSample& s : samples) {
    if (s.environment == env) out.push_back(s);
  }
  return out;
}

// --- model inputs -----------------------------------------------------------

std::vector<Example> PreparedSet::examples() const {
  std::vector<Example> out(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) out[i] = {inputs[i], targets[i]};
  return out;
}

std::vector<std::span<const double>> PreparedSet::input_spans() const { return {inputs.begin(), inputs.end()}; }

PreparedSet prepare(std::span<const CirSample> samples, std::size_t k, std::size_t input_length) {
  if (input_length < k) raise<ConfigError>("prepare: input length ", input_length, " < K=", k);
  PreparedSet out;
  out.inputs.reserve(samples.size());
  for (const CirSample& s : samples) {
    auto x = truncate_to_k(s.cir, k);
    x.resize(input_length, 0.0);
    out.inputs.push_back(std::move(x));
    out.targets.push_back(s.label());
    out.los.push_back(s.los);
  }
  return out;
}

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (count >= population) return idx;
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace remnet::data
