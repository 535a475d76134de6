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

#include "remnet/eval/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "remnet/common.hpp"
#include "remnet/model/checkpoint.hpp"
#include "remnet/model/inference_f32.hpp"
#include "remnet/quant/int8_engine.hpp"
#include "remnet/rng.hpp"

namespace remnet::eval {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_pair(std::span<const double> preds, std::span<const double> targets, const char* what) {
  if (preds.size() != targets.size()) raise<ShapeError>(what, ": ", preds.size(), " predictions vs ", targets.size(), " targets");
  if (preds.empty()) raise<DataError>(what, ": empty input");
}

double sorted_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double mean_abs(std::span<const double> v) {
  if (v.empty()) return kNaN;
  std::vector<double> a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
  return sorted_sum(std::move(a)) / static_cast<double>(v.size());
}

double r2_or_nan(std::span<const double> preds, std::span<const double> targets) {
  if (targets.empty()) return kNaN;
  try {
    return r_squared(preds, targets);
  } catch (const DataError&) {
    return kNaN;
  }
}

double improvement(double raw, double mitigated) { return raw > 0.0 ? (raw - mitigated) / raw : kNaN; }

}  // namespace

double mae(std::span<const double> preds, std::span<const double> targets) {
  check_pair(preds, targets, "mae");
  std::vector<double> e(preds.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::abs(targets[i] - preds[i]);
  return sorted_sum(std::move(e)) / static_cast<double>(preds.size());
}

double r_squared(std::span<const double> preds, std::span<const double> targets) {
  check_pair(preds, targets, "r_squared");
  const double mean = sorted_sum({targets.begin(), targets.end()}) / static_cast<double>(targets.size());
  std::vector<double> sse(targets.size());
  std::vector<double> sst(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    sse[i] = (targets[i] - preds[i]) * (targets[i] - preds[i]);
    sst[i] = (targets[i] - mean) * (targets[i] - mean);
  }
  const double tot = sorted_sum(std::move(sst));
  if (tot == 0.0) raise<DataError>("undefined R²: targets are constant");
  return 1.0 - sorted_sum(std::move(sse)) / tot;
}

double stddev(std::span<const double> values) {
  if (values.empty()) return kNaN;
  const double n = static_cast<double>(values.size());
  const double mean = sorted_sum({values.begin(), values.end()}) / n;
  std::vector<double> d(values.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (values[i] - mean) * (values[i] - mean);
  return std::sqrt(sorted_sum(std::move(d)) / n);
}

std::size_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  if (bins == 0) raise<ConfigError>("histogram: bins must be positive");
  if (!(hi > lo)) raise<ConfigError>("histogram: empty range [", lo, ", ", hi, ")");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    std::size_t bin;
    if (v < lo) {
      ++h.underflow;
      bin = 0;
    } else if (v >= hi) {
      ++h.overflow;
      bin = bins - 1;
    } else {
      bin = std::min(bins - 1, static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins)));
    }
    ++h.counts[bin];
  }
  return h;
}

EvalReport report_from_predictions(std::span<const double> preds, std::span<const double> targets,
                                   const std::vector<bool>& los) {
  check_pair(preds, targets, "evaluate");
  if (los.size() != targets.size()) raise<ShapeError>("evaluate: los flags do not match targets");

  std::vector<double> p[2], t[2], res[2];
  std::vector<double> all_res(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const int c = los[i] ? 1 : 0;
    p[c].push_back(preds[i]);
    t[c].push_back(targets[i]);
    res[c].push_back(targets[i] - preds[i]);
    all_res[i] = targets[i] - preds[i];
  }

  EvalReport r;
  r.count_nlos = t[0].size();
  r.count_los = t[1].size();
  r.mae_nlos = mean_abs(res[0]);
  r.mae_los = mean_abs(res[1]);
  r.r2_nlos = r2_or_nan(p[0], t[0]);
  r.r2_los = r2_or_nan(p[1], t[1]);
  r.sigma_nlos = stddev(res[0]);
  r.sigma_los = stddev(res[1]);
  r.raw_mae_nlos = mean_abs(t[0]);
  r.raw_mae_los = mean_abs(t[1]);
  r.raw_sigma_nlos = stddev(t[0]);
  r.improvement_nlos = improvement(r.raw_mae_nlos, r.mae_nlos);
  r.improvement_los = improvement(r.raw_mae_los, r.mae_los);
  r.mae_all = mean_abs(all_res);
  r.histogram = histogram(all_res);
  return r;
}

std::string EvalReport::to_json(int indent) const {
  nlohmann::ordered_json j;
  j["count_nlos"] = count_nlos;
  j["count_los"] = count_los;
  j["mae_nlos"] = mae_nlos;
  j["mae_los"] = mae_los;
  j["r2_nlos"] = r2_nlos;
  j["r2_los"] = r2_los;
  j["sigma_nlos"] = sigma_nlos;
  j["sigma_los_extra"] = sigma_los;
  j["raw_mae_nlos"] = raw_mae_nlos;
  j["raw_mae_los"] = raw_mae_los;
  j["raw_sigma_nlos"] = raw_sigma_nlos;
  j["improvement_nlos"] = improvement_nlos;
  j["improvement_los"] = improvement_los;
  j["mae_all"] = mae_all;
  j["histogram"] = {{"lo", histogram.lo},
                    {"hi", histogram.hi},
                    {"underflow", histogram.underflow},
                    {"overflow", histogram.overflow},
                    {"counts", histogram.counts}};
  return j.dump(indent);
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "metric,value\n";
  const std::pair<const char*, double> rows[] = {
      {"count_nlos", static_cast<double>(count_nlos)},
      {"count_los", static_cast<double>(count_los)},
      {"mae_nlos", mae_nlos},
      {"mae_los", mae_los},
      {"r2_nlos", r2_nlos},
      {"r2_los", r2_los},
      {"sigma_nlos", sigma_nlos},
      {"sigma_los_extra", sigma_los},
      {"raw_mae_nlos", raw_mae_nlos},
      {"raw_mae_los", raw_mae_los},
      {"raw_sigma_nlos", raw_sigma_nlos},
      {"improvement_nlos", improvement_nlos},
      {"improvement_los", improvement_los},
      {"mae_all", mae_all},
  };
  const auto old = out.precision(17);
  for (const auto& [k, v] : rows) out << k << ',' << v << '\n';
  out.precision(old);
}

void EvalReport::write_histogram_csv(std::ostream& out) const {
  out << "bin_left,count\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < histogram.counts.size(); ++i) out << histogram.bin_left(i) << ',' << histogram.counts[i] << '\n';
  out.precision(old);
}

EvalReport evaluate(const Predictor& predictor, const data::PreparedSet& set, std::size_t threads) {
  std::vector<double> preds(set.size());
  parallel_for(set.size(), threads, [&](std::size_t i) { preds[i] = predictor(set.inputs[i]); });
  return report_from_predictions(preds, set.targets, set.los);
}

EvalReport evaluate(const RemnetConfig& config, const ModelWeights& weights, const data::PreparedSet& set,
                    std::size_t threads) {
  config.validate();
  return evaluate(
      [&](std::span<const double> x) {
        Rng unused;
        return forward(config, weights, x, Mode::infer, unused);
      },
      set, threads);
}

EvalReport evaluate(const quant::QuantizedModel& model, const data::PreparedSet& set, std::size_t threads) {
  return evaluate([&](std::span<const double> x) { return quant::predict_int8(model, x); }, set, threads);
}

std::size_t padded_length(std::size_t k, std::uint32_t modules) {
  if (k == 0) raise<ConfigError>("padded_length: K must be positive");
  const std::size_t step = std::size_t{1} << modules;
  return (k + step - 1) / step * step;
}

std::vector<KSweepRow> k_sweep(std::span<const data::CirSample> train, std::span<const data::CirSample> test,
                               const KSweepOptions& options) {
  if (options.repeats == 0) raise<ConfigError>("k_sweep: repeats must be positive");
  if (train.empty() || test.empty()) raise<DataError>("k_sweep: empty train or test set");
  options.plan.validate();

  std::vector<KSweepRow> rows;
  for (std::size_t k : options.k_values) {
    KSweepRow row;
    row.k = k;
    row.input_length = padded_length(k, options.base.modules);
    RemnetConfig config = options.base;
    config.input_length = static_cast<std::uint32_t>(row.input_length);
    config.validate();

    const auto train_set = data::prepare(train, k, row.input_length);
    const auto test_set = data::prepare(test, k, row.input_length);
    const auto train_ex = train_set.examples();
    const auto test_ex = test_set.examples();

    for (std::size_t r = 0; r < options.repeats; ++r) {
      const std::uint64_t seed = derive_seed(derive_seed(options.seed, k), r);
      Rng rng(seed);
      ModelWeights w = build(config, rng);
      TrainPlan plan = options.plan;
      plan.shuffle_seed = derive_seed(seed, 1);
      RemnetObjective objective(config);
      fit(objective, w, train_ex, plan, rng);
      row.test_mae.push_back(mean_abs_error(objective, w, test_ex));
    }
    row.mean_mae = std::accumulate(row.test_mae.begin(), row.test_mae.end(), 0.0) / static_cast<double>(options.repeats);
    row.std_mae = stddev(row.test_mae);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_k_sweep_csv(std::ostream& out, const std::vector<KSweepRow>& rows) {
  out << "k,input_length,repeats,mean_mae,std_mae\n";
  const auto old = out.precision(17);
  for (const auto& r : rows) {
    out << r.k << ',' << r.input_length << ',' << r.test_mae.size() << ',' << r.mean_mae << ',' << r.std_mae << '\n';
  }
  out.precision(old);
}

TransferMatrix transfer_matrix(std::span<const data::CirSample> samples, const TransferOptions& options) {
  if (samples.empty()) raise<DataError>("transfer_matrix: empty dataset");
  if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0)) {
    raise<ConfigError>("transfer_matrix: train_fraction must be in (0, 1)");
  }
  options.mlp.validate();
  options.plan.validate();

  const bool by_env = options.axis == TransferAxis::environment;
  const std::size_t class_count = by_env ? std::size(data::kEnvironments) : std::size(data::kObstacles);
  auto class_of = [&](const data::CirSample& s) {
    return by_env ? static_cast<std::size_t>(s.environment) : static_cast<std::size_t>(s.obstacle);
  };

  std::vector<std::vector<data::CirSample>> members(class_count);
  for (const auto& s : samples) members[class_of(s)].push_back(s);

  TransferMatrix m;
  m.axis = options.axis;
  std::vector<data::PreparedSet> train_parts;
  std::vector<data::PreparedSet> test_parts;
  const std::size_t width = options.mlp.input_dim;
  for (std::size_t c = 0; c < class_count; ++c) {
    if (members[c].empty()) continue;
    m.classes.emplace_back(by_env ? data::to_string(data::kEnvironments[c]) : data::to_string(data::kObstacles[c]));
    const auto order = data::sample_indices(members[c].size(), members[c].size(), derive_seed(options.seed, c));
    auto n_train = static_cast<std::size_t>(std::floor(options.train_fraction * static_cast<double>(order.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, std::max<std::size_t>(order.size() - 1, 1));
    std::vector<data::CirSample> tr, te;
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? tr : te).push_back(members[c][order[i]]);
    if (te.empty()) te = tr;  // a single sample is both train and test
    const std::size_t k = std::min<std::size_t>(width, data::kWindowLength);
    train_parts.push_back(data::prepare(tr, k, width));
    test_parts.push_back(data::prepare(te, k, width));
  }

  const std::size_t n = m.classes.size();
  m.cells.assign(n, std::vector<TransferCell>(n));
  for (std::size_t s = 0; s < n; ++s) {
    Rng rng(derive_seed(options.seed ^ 0x7A5F, s));
    ModelWeights w = mlp_build(options.mlp, rng);
    TrainPlan plan = options.plan;
    plan.shuffle_seed = derive_seed(options.seed, 1000 + s);
    MlpObjective objective(options.mlp);
    const auto ex = train_parts[s].examples();
    fit(objective, w, ex, plan, rng);
    for (std::size_t t = 0; t < n; ++t) {
      const auto test_ex = test_parts[t].examples();
      TransferCell& cell = m.cells[s][t];
      cell.mae = mean_abs_error(objective, w, test_ex);
      cell.raw_mae = mean_abs(test_parts[t].targets);
      cell.test_count = test_ex.size();
    }
  }
  return m;
}

void write_transfer_csv(std::ostream& out, const TransferMatrix& matrix) {
  out << "train,test,mae,raw_mae,test_count\n";
  const auto old = out.precision(17);
  for (std::size_t s = 0; s < matrix.classes.size(); ++s) {
    for (std::size_t t = 0; t < matrix.classes.size(); ++t) {
      const auto& c = matrix.cells[s][t];
      out << matrix.classes[s] << ',' << matrix.classes[t] << ',' << c.mae << ',' << c.raw_mae << ',' << c.test_count << '\n';
    }
  }
  out.precision(old);
}

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::float64: return "float64";
    case Variant::float32: return "float32";
    case Variant::int8: return "int8";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "float64" || text == "f64") return Variant::float64;
  if (text == "float32" || text == "f32") return Variant::float32;
  if (text == "int8") return Variant::int8;
  raise<ConfigError>("unknown model variant '", text, "' (float64, float32, int8)");
}

BenchResult bench_latency(const quant::QuantizedModel& model, const ModelWeights& float_weights, Variant variant,
                          const BenchOptions& options) {
  if (options.iterations == 0) raise<ConfigError>("bench_latency: iterations must be positive");
  if (options.batch == 0) raise<ConfigError>("bench_latency: batch must be positive");
  const RemnetConfig& config = model.config;
  if (!float_weights.same_layout(remnet_layout(config))) {
    raise<ConfigError>("bench_latency: float weights do not match the quantized model's config");
  }

  Rng rng(options.seed);
  std::vector<std::vector<double>> inputs(options.batch, std::vector<double>(config.input_length));
  for (auto& x : inputs) {
    for (double& v : x) v = rng.uniform();
  }

  BenchResult result;
  result.variant = variant;
  result.iterations = options.iterations;

  std::function<double(std::size_t)> run;
  Rng unused;
  std::vector<std::vector<float>> inputs_f;
  std::vector<std::vector<std::int8_t>> inputs_q;
  std::optional<Float32Model> f32;
  std::optional<quant::Int8Engine> engine;
  switch (variant) {
    case Variant::float64:
      result.model_bytes = encode_checkpoint(float_weights, config).size();
      run = [&](std::size_t i) { return forward(config, float_weights, inputs[i], Mode::infer, unused); };
      break;
    case Variant::float32:
      result.model_bytes = encode_checkpoint(float_weights, config).size();
      f32.emplace(config, float_weights);
      for (const auto& x : inputs) inputs_f.emplace_back(x.begin(), x.end());
      run = [&](std::size_t i) { return static_cast<double>(f32->run(std::span<const float>(inputs_f[i]))); };
      break;
    case Variant::int8:
      result.model_bytes = quant::encode_quantized(model).size();
      engine.emplace(model);
      for (const auto& x : inputs) inputs_q.push_back(quant::quantize_input(model, x));
      run = [&](std::size_t i) { return engine->run(inputs_q[i]); };
      break;
  }

  for (std::size_t i = 0; i < options.warmup; ++i) result.checksum += run(i % options.batch);
  std::vector<double> ms(options.iterations);
  result.checksum = 0.0;
  using clock = std::chrono::steady_clock;
  for (std::size_t i = 0; i < options.iterations; ++i) {
    const auto t0 = clock::now();
    const double y = run(i % options.batch);
    const auto t1 = clock::now();
    result.checksum += y;
    ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  result.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  const std::size_t n = ms.size();
  result.median_ms = n % 2 == 1 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  result.p95_ms = ms[std::min(n - 1, static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1)];
  return result;
}

}  // namespace remnet::eval
