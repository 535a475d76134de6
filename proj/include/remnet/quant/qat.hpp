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

// Quantization-aware training: fine-tunes float weights with fake-quant
// nodes on every weight tensor and activation point, then exports the
// integer model.

#include <span>
#include <vector>

#include "remnet/quant/qmodel.hpp"
#include "remnet/train/trainer.hpp"

namespace remnet::quant {

struct QatOptions {
  // false turns every fake-quant node into the identity (plain float training).
  bool simulate = true;
  double ema_decay = 0.99;
  // Activation ranges start from a min/max pass over this many training inputs.
  std::size_t init_samples = 500;
};

// Fake quantization of weight tensors (biases stay float during training).
ModelWeights fake_quant_weights(const ModelWeights& weights);

class QatObjective : public TrainingObjective {
 public:
  QatObjective(RemnetConfig config, QatOptions options, std::vector<Range> initial_ranges, std::size_t batch_size);

  const ModelWeights& batch_weights(const ModelWeights& master) override;
  double sample_gradient(const ModelWeights& weights, const Example& example, double grad_scale, Rng& rng,
                         ModelWeights& grads, std::size_t slot) override;
  void end_batch(std::size_t batch_size) override;
  double predict(const ModelWeights& weights, std::span<const double> input) const override;

  // EMA-tracked activation ranges.
  const std::vector<Range>& ranges() const { return ema_; }
  // Parameters the fake-quant nodes used for the latest batch.
  const std::vector<QuantParams>& params() const { return params_; }

 private:
  RemnetConfig config_;
  QatOptions options_;
  std::vector<Range> ema_;
  std::vector<QuantParams> params_;
  ModelWeights quantized_;
  std::vector<std::vector<Range>> slot_ranges_;
};

struct QatResult {
  QuantizedModel model;
  FitResult history;
  std::vector<Range> ranges;
};

/// Fine-tunes `weights` in place and exports the integer model from the
/// final weights and EMA ranges.
QatResult train_qat(const RemnetConfig& config, ModelWeights& weights, std::span<const Example> train_set,
                    const TrainPlan& plan, Rng& rng, const QatOptions& options = {},
                    const FitCallbacks& callbacks = {});

}  // namespace remnet::quant
