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

#include "remnet/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

namespace remnet {

void TrainPlan::validate() const {
  if (batch_size == 0) raise<ConfigError>("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    raise<ConfigError>("learning_rate must be positive, got ", learning_rate);
  }
  if (threads == 0) raise<ConfigError>("threads must be positive");
}

double RemnetObjective::sample_gradient(const ModelWeights& weights, const Example& ex, double grad_scale, Rng& rng,
                                        ModelWeights& grads, std::size_t) {
  ForwardTrace trace;
  const double err = forward(config_, weights, ex.input, Mode::train, rng, nullptr, &trace) - ex.target;
  backward_from_trace(config_, weights, trace, abs_subgradient(err) * grad_scale, grads);
  return std::abs(err);
}

double RemnetObjective::predict(const ModelWeights& weights, std::span<const double> input) const {
  Rng unused(0);
  return forward(config_, weights, input, Mode::infer, unused);
}

double MlpObjective::sample_gradient(const ModelWeights& weights, const Example& ex, double grad_scale, Rng&,
                                     ModelWeights& grads, std::size_t) {
  MlpTrace trace;
  const double err = mlp_forward(config_, weights, ex.input, &trace) - ex.target;
  mlp_backward_from_trace(config_, weights, trace, abs_subgradient(err) * grad_scale, grads);
  return std::abs(err);
}

double MlpObjective::predict(const ModelWeights& weights, std::span<const double> input) const {
  return mlp_forward(config_, weights, input);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min(threads, n);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

void write_training_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,train_mae,val_mae,wall_ms\n";
  const auto old = out.precision(17);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.train_mae << ',';
    if (e.val_mae) out << *e.val_mae;
    out << ',' << e.wall_ms << '\n';
  }
  out.precision(old);
}

double mean_abs_error(const TrainingObjective& objective, const ModelWeights& weights,
                      std::span<const Example> examples) {
  if (examples.empty()) raise<DataError>("mean_abs_error: empty set");
  double s = 0.0;
  for (const auto& ex : examples) s += std::abs(objective.predict(weights, ex.input) - ex.target);
  return s / static_cast<double>(examples.size());
}

FitResult fit(TrainingObjective& objective, ModelWeights& weights, std::span<const Example> train_set,
              const TrainPlan& plan, Rng& rng, const FitCallbacks& callbacks) {
  plan.validate();
  if (train_set.empty()) raise<DataError>("fit: empty training set");
  FitResult result;
  if (plan.epochs == 0) return result;

  AdamState adam = AdamState::for_weights(weights, AdamOptions{plan.learning_rate});
  const std::uint64_t dropout_base = rng.next_u64();
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);

  std::vector<ModelWeights> slot_grads(std::min(plan.batch_size, n), weights.zeros_like());
  std::vector<double> slot_loss(slot_grads.size());
  ModelWeights batch_grads = weights.zeros_like();
  std::uint64_t global_index = 0;

  for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler(derive_seed(plan.shuffle_seed, epoch));
    shuffler.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += plan.batch_size) {
      const std::size_t count = std::min(plan.batch_size, n - start);
      const double scale = 1.0 / static_cast<double>(count);
      const ModelWeights& w = objective.batch_weights(weights);
      const std::uint64_t batch_base = global_index;
      parallel_for(count, plan.threads, [&](std::size_t slot) {
        slot_grads[slot].set_zero();
        Rng sample_rng(derive_seed(dropout_base, batch_base + slot));
        slot_loss[slot] = objective.sample_gradient(w, train_set[order[start + slot]], scale, sample_rng,
                                                    slot_grads[slot], slot);
      });
      global_index += count;
      objective.end_batch(count);

      batch_grads.set_zero();
      double batch_loss = 0.0;
      for (std::size_t slot = 0; slot < count; ++slot) {
        batch_grads.add_scaled(slot_grads[slot], 1.0);
        batch_loss += slot_loss[slot];
      }
      if (!std::isfinite(batch_loss)) {
        raise<NonFiniteError>("training diverged: non-finite loss at epoch ", epoch, ", batch starting at ", start);
      }
      epoch_loss += batch_loss;
      adam_step(adam, weights, batch_grads);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_mae = epoch_loss / static_cast<double>(n);
    if (!callbacks.validation.empty()) entry.val_mae = mean_abs_error(objective, weights, callbacks.validation);
    entry.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.loss_history.push_back(entry.train_mae);
    result.log.push_back(entry);
    if (callbacks.on_epoch) callbacks.on_epoch(entry);
  }
  return result;
}

}  // namespace remnet
