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

#include "remnet/quant/qat.hpp"

#include <algorithm>

namespace remnet::quant {
namespace {

class FakeQuantTap : public ActivationTap {
 public:
  FakeQuantTap(const std::vector<QuantParams>* params, std::vector<Range>* stats)
      : params_(params), stats_(stats) {}

  void on_activation(std::size_t pt, std::span<double> values, std::vector<std::uint8_t>& pass) override {
    if (stats_) (*stats_)[pt].observe(values);
    if (!params_) return;
    const QuantParams& p = (*params_)[pt];
    const double lo = p.real_min();
    const double hi = p.real_max();
    pass.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      pass[i] = values[i] >= lo && values[i] <= hi;
      values[i] = fake_quant(values[i], p);
    }
  }

 private:
  const std::vector<QuantParams>* params_;
  std::vector<Range>* stats_;
};

}  // namespace

ModelWeights fake_quant_weights(const ModelWeights& weights) {
  ModelWeights out = weights;
  for (std::size_t idx = 0; idx < out.tensor_count(); idx += 2) {
    auto v = out[idx].values();
    const QuantParams p = weight_params(max_abs(v));
    for (double& x : v) x = fake_quant(x, p);
  }
  return out;
}

QatObjective::QatObjective(RemnetConfig config, QatOptions options, std::vector<Range> initial_ranges,
                           std::size_t batch_size)
    : config_(config),
      options_(options),
      ema_(std::move(initial_ranges)),
      slot_ranges_(batch_size, std::vector<Range>(activation_point_count(config))) {
  config_.validate();
  if (ema_.size() != activation_point_count(config_)) raise<ShapeError>("QatObjective: range count mismatch");
  if (!(options_.ema_decay >= 0.0 && options_.ema_decay < 1.0)) {
    raise<ConfigError>("ema_decay must be in [0, 1), got ", options_.ema_decay);
  }
}

const ModelWeights& QatObjective::batch_weights(const ModelWeights& master) {
  if (!options_.simulate) return master;
  params_ = derive_activation_params(config_, master, ema_);
  quantized_ = fake_quant_weights(master);
  return quantized_;
}

double QatObjective::sample_gradient(const ModelWeights& weights, const Example& ex, double grad_scale, Rng& rng,
                                     ModelWeights& grads, std::size_t slot) {
  FakeQuantTap tap(options_.simulate ? &params_ : nullptr, &slot_ranges_.at(slot));
  ForwardTrace trace;
  const double err = forward(config_, weights, ex.input, Mode::train, rng, &tap, &trace) - ex.target;
  backward_from_trace(config_, weights, trace, abs_subgradient(err) * grad_scale, grads);
  return std::abs(err);
}

void QatObjective::end_batch(std::size_t batch_size) {
  const double d = options_.ema_decay;
  for (std::size_t pt = 0; pt < ema_.size(); ++pt) {
    Range batch;
    for (std::size_t slot = 0; slot < batch_size; ++slot) {
      batch.merge(slot_ranges_[slot][pt]);
      slot_ranges_[slot][pt] = Range{};
    }
    if (!batch.seen) continue;
    Range& r = ema_[pt];
    if (!r.seen) {
      r = batch;
      continue;
    }
    r.min = d * r.min + (1.0 - d) * batch.min;
    r.max = d * r.max + (1.0 - d) * batch.max;
  }
}

double QatObjective::predict(const ModelWeights& weights, std::span<const double> input) const {
  Rng unused(0);
  if (!options_.simulate) return forward(config_, weights, input, Mode::infer, unused);
  const auto params = derive_activation_params(config_, weights, ema_);
  FakeQuantTap tap(&params, nullptr);
  return forward(config_, fake_quant_weights(weights), input, Mode::infer, unused, &tap);
}

QatResult train_qat(const RemnetConfig& config, ModelWeights& weights, std::span<const Example> train_set,
                    const TrainPlan& plan, Rng& rng, const QatOptions& options, const FitCallbacks& callbacks) {
  if (train_set.empty()) raise<DataError>("train_qat: empty training set");
  const std::size_t n_init = std::clamp<std::size_t>(options.init_samples, 1, train_set.size());
  std::vector<std::span<const double>> init(n_init);
  for (std::size_t i = 0; i < n_init; ++i) init[i] = train_set[i].input;

  QatObjective objective(config, options, collect_ranges(config, weights, init), plan.batch_size);
  QatResult result;
  result.history = fit(objective, weights, train_set, plan, rng, callbacks);
  result.ranges = objective.ranges();
  result.model = export_quantized(config, weights, result.ranges);
  return result;
}

}  // namespace remnet::quant
