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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "remnet/model/mlp.hpp"
#include "remnet/model/remnet.hpp"
#include "remnet/rng.hpp"
#include "remnet/train/adam.hpp"

namespace remnet {

struct TrainPlan {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 3e-4;
  std::uint64_t shuffle_seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

// What fit() optimizes. Implementations provide the per-example gradient of
// the absolute error; the trainer owns batching, reduction and Adam.
class TrainingObjective {
 public:
  virtual ~TrainingObjective() = default;

  // Weights used by forward/backward for the next batch. Quantization-aware
  // training substitutes fake-quantized copies here.
  virtual const ModelWeights& batch_weights(const ModelWeights& master) { return master; }

  // Train-mode forward and backward of one example. Adds
  // grad_scale * d|pred - target|/dw into `grads` and returns |pred - target|.
  // `slot` is the example's position inside the batch; calls for distinct
  // slots may run concurrently.
  virtual double sample_gradient(const ModelWeights& weights, const Example& example, double grad_scale, Rng& rng,
                                 ModelWeights& grads, std::size_t slot) = 0;

  virtual void end_batch(std::size_t /*batch_size*/) {}

  // Inference-mode prediction.
  virtual double predict(const ModelWeights& weights, std::span<const double> input) const = 0;
};

class RemnetObjective : public TrainingObjective {
 public:
  explicit RemnetObjective(RemnetConfig config) : config_(config) {}
  double sample_gradient(const ModelWeights& weights, const Example& example, double grad_scale, Rng& rng,
                         ModelWeights& grads, std::size_t slot) override;
  double predict(const ModelWeights& weights, std::span<const double> input) const override;
  const RemnetConfig& config() const { return config_; }

 private:
  RemnetConfig config_;
};

class MlpObjective : public TrainingObjective {
 public:
  explicit MlpObjective(MlpConfig config) : config_(config) {}
  double sample_gradient(const ModelWeights& weights, const Example& example, double grad_scale, Rng& rng,
                         ModelWeights& grads, std::size_t slot) override;
  double predict(const ModelWeights& weights, std::span<const double> input) const override;

 private:
  MlpConfig config_;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_mae = 0.0;
  std::optional<double> val_mae;
  double wall_ms = 0.0;
};

struct FitCallbacks {
  std::function<void(const EpochLog&)> on_epoch;
  std::span<const Example> validation;
};

struct FitResult {
  // Mean train-mode absolute error of every epoch.
  std::vector<double> loss_history;
  std::vector<EpochLog> log;
};

/// Mini-batch Adam on the mean absolute error.
///
/// Each epoch shuffles the example order with a generator seeded from
/// (plan.shuffle_seed, epoch); the last partial batch is kept. Per-example
/// dropout streams are derived from one draw of `rng` and the example's
/// global position, and per-example gradients are reduced in batch order, so
/// the result is bit-identical for any thread count.
FitResult fit(TrainingObjective& objective, ModelWeights& weights, std::span<const Example> train_set,
              const TrainPlan& plan, Rng& rng, const FitCallbacks& callbacks = {});

// epoch,train_mae,val_mae,wall_ms; val_mae is empty when not tracked.
void write_training_log(std::ostream& out, const std::vector<EpochLog>& log);

// Mean absolute error of inference-mode predictions.
double mean_abs_error(const TrainingObjective& objective, const ModelWeights& weights,
                      std::span<const Example> examples);

// Runs fn(i) for i in [0, n) on up to `threads` threads.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace remnet
