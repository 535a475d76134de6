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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "remnet/quant/int8_engine.hpp"
#include "remnet/quant/qat.hpp"
#include "remnet/quant/simulator.hpp"
#include "remnet/train/adam.hpp"
#include "remnet/train/trainer.hpp"
#include "test_support.hpp"

namespace remnet {
namespace {

ModelWeights two_params(double x, double y) {
  ModelWeights w;
  w.add("p", {2})[0] = x;
  w.at("p")[1] = y;
  return w;
}

TEST(Adam, ZeroGradientLeavesWeights) {
  ModelWeights w = two_params(0.3, -0.7);
  const ModelWeights before = w;
  AdamState s = AdamState::for_weights(w);
  adam_step(s, w, w.zeros_like());
  EXPECT_TRUE(w == before);
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepIsSignScaled) {
  ModelWeights w = two_params(1.0, 1.0);
  ModelWeights g = two_params(0.25, -4.0);
  AdamState s = AdamState::for_weights(w);
  adam_step(s, w, g);
  const double lr = 3e-4, eps = 1e-8;
  EXPECT_NEAR(w.at("p")[0], 1.0 - lr * 0.25 / (0.25 + eps), 1e-15);
  EXPECT_NEAR(w.at("p")[1], 1.0 + lr * 4.0 / (4.0 + eps), 1e-15);
}

TEST(Adam, ZeroBetasGiveSignScaledSgd) {
  ModelWeights w = two_params(0.0, 0.0);
  AdamState s = AdamState::for_weights(w, AdamOptions{0.01, 0.0, 0.0, 1e-8});
  Rng rng(1);
  double expect[2] = {0.0, 0.0};
  for (int t = 0; t < 50; ++t) {
    const double g0 = rng.normal(), g1 = 5.0 * rng.normal();
    adam_step(s, w, two_params(g0, g1));
    expect[0] -= 0.01 * g0 / (std::abs(g0) + 1e-8);
    expect[1] -= 0.01 * g1 / (std::abs(g1) + 1e-8);
  }
  EXPECT_NEAR(w.at("p")[0], expect[0], 1e-12);
  EXPECT_NEAR(w.at("p")[1], expect[1], 1e-12);
}

TEST(Adam, StepNeverExceedsMomentBound) {
  // |m_hat / sqrt(v_hat)| <= (1 - b1) / sqrt(1 - b2) for b1^2 < b2.
  const double bound = 3e-4 * 0.1 / std::sqrt(0.001) * (1.0 + 1e-6);
  ModelWeights w = two_params(0.0, 0.0);
  AdamState s = AdamState::for_weights(w);
  Rng rng(2);
  for (int t = 0; t < 5000; ++t) {
    const ModelWeights before = w;
    const double scale = std::pow(10.0, rng.uniform(-6.0, 3.0));
    adam_step(s, w, two_params(scale * rng.normal(), scale * rng.normal(1.0, 0.1)));
    for (int i = 0; i < 2; ++i) EXPECT_LE(std::abs(w.at("p")[i] - before.at("p")[i]), bound) << t;
    for (double v : s.v.at("p").values()) EXPECT_GE(v, 0.0);
  }
}

TEST(Adam, WorstCaseStepMatchesMomentBound) {
  // A large gradient after a long run of tiny ones: |m_hat / sqrt(v_hat)|
  // approaches (1 - b1) / sqrt(1 - b2) but never exceeds it.
  ModelWeights w = two_params(0.0, 0.0);
  AdamState s = AdamState::for_weights(w);
  for (int t = 0; t < 20000; ++t) adam_step(s, w, two_params(1e-6, 1e-6));
  const ModelWeights before = w;
  adam_step(s, w, two_params(1e3, 1e3));
  const double step = std::abs(w.at("p")[0] - before.at("p")[0]);
  EXPECT_GT(step, 3e-4);
  EXPECT_LE(step, 3e-4 * 0.1 / std::sqrt(0.001) * (1.0 + 1e-6));
}

TEST(Adam, QuadraticBowlConvergesMonotonically) {
  ModelWeights w = two_params(0.0, 0.0);
  AdamState s = AdamState::for_weights(w);
  auto dist = [&] { return std::hypot(w.at("p")[0] - 1.0, w.at("p")[1] + 2.0); };
  double prev = dist();
  const double start = prev;
  for (int t = 0; t < 500; ++t) {
    const double x = w.at("p")[0], y = w.at("p")[1];
    adam_step(s, w, two_params(2.0 * (x - 1.0), 20.0 * (y + 2.0)));
    const double d = dist();
    if (t >= 10) EXPECT_LT(d, prev) << t;
    prev = d;
  }
  EXPECT_LT(prev, start);
}

TEST(Adam, NonFiniteGradientRejected) {
  ModelWeights w = two_params(1.0, 2.0);
  const ModelWeights before = w;
  AdamState s = AdamState::for_weights(w);
  EXPECT_THROW(adam_step(s, w, two_params(std::nan(""), 0.0)), NonFiniteError);
  EXPECT_TRUE(w == before);
}

struct LinearTask {
  std::vector<std::vector<double>> inputs;
  std::vector<Example> examples;

  explicit LinearTask(std::size_t n, std::uint64_t seed = 1) : inputs(testing::random_inputs(n, 128, seed)) {
    for (const auto& x : inputs) examples.push_back({x, 0.3 * x[0] + 0.05});
  }
};

TEST(Fit, ZeroEpochsAndEmptySet) {
  const RemnetConfig config;
  LinearTask task(8);
  Rng rng(1);
  ModelWeights w = build(config, rng);
  const ModelWeights before = w;
  RemnetObjective obj(config);
  TrainPlan plan;
  plan.epochs = 0;
  EXPECT_TRUE(fit(obj, w, task.examples, plan, rng).loss_history.empty());
  EXPECT_TRUE(w == before);
  plan.epochs = 1;
  EXPECT_THROW(fit(obj, w, std::span<const Example>{}, plan, rng), DataError);
  plan.batch_size = 0;
  EXPECT_THROW(fit(obj, w, task.examples, plan, rng), ConfigError);
}

TEST(Fit, DeterministicForAnyThreadCount) {
  const RemnetConfig config;
  LinearTask task(70);
  TrainPlan plan;
  plan.epochs = 3;
  plan.shuffle_seed = 5;
  auto run = [&](std::size_t threads) {
    Rng rng(11);
    ModelWeights w = build(config, rng);
    RemnetObjective obj(config);
    TrainPlan p = plan;
    p.threads = threads;
    const auto r = fit(obj, w, task.examples, p, rng);
    return std::make_pair(r.loss_history, w);
  };
  const auto a = run(1);
  const auto b = run(1);
  const auto c = run(3);
  EXPECT_EQ(a.first.size(), 3u);
  EXPECT_EQ(a.first, b.first);
  EXPECT_TRUE(a.second == b.second);
  EXPECT_EQ(a.first, c.first);
  EXPECT_TRUE(a.second == c.second);
}

TEST(Fit, DivergenceIsReported) {
  const RemnetConfig config;
  LinearTask task(4);
  task.examples[2].target = std::nan("");
  Rng rng(1);
  ModelWeights w = build(config, rng);
  RemnetObjective obj(config);
  TrainPlan plan;
  plan.epochs = 1;
  try {
    fit(obj, w, task.examples, plan, rng);
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos);
  }
}

TEST(Fit, TrainingReducesErrorAcrossSeeds) {
  const RemnetConfig config;
  LinearTask task(64, 3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    ModelWeights w = build(config, rng);
    RemnetObjective obj(config);
    const double initial = mean_abs_error(obj, w, task.examples);
    TrainPlan plan;
    plan.epochs = 5;
    plan.shuffle_seed = seed;
    fit(obj, w, task.examples, plan, rng);
    EXPECT_LE(mean_abs_error(obj, w, task.examples), initial) << seed;
  }
}

TEST(Fit, LogCsv) {
  std::vector<EpochLog> log(2);
  log[0] = {0, 0.5, std::nullopt, 12.0};
  log[1] = {1, 0.25, 0.3, 11.0};
  std::ostringstream os;
  write_training_log(os, log);
  EXPECT_EQ(os.str(), "epoch,train_mae,val_mae,wall_ms\n0,0.5,,12\n1,0.25,0.29999999999999999,11\n");
}

// 256-sample linear task with the reference recipe (batch 32, lr 3e-4).
class Overfit : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    task_ = new LinearTask(256);
    Rng rng(7);
    weights_ = new ModelWeights(build(RemnetConfig{}, rng));
    TrainPlan plan;
    plan.epochs = 200;
    plan.shuffle_seed = 3;
    RemnetObjective obj{RemnetConfig{}};
    history_ = new FitResult(fit(obj, *weights_, task_->examples, plan, rng));
  }
  static void TearDownTestSuite() {
    delete task_;
    delete weights_;
    delete history_;
  }
  static LinearTask* task_;
  static ModelWeights* weights_;
  static FitResult* history_;
};

LinearTask* Overfit::task_ = nullptr;
ModelWeights* Overfit::weights_ = nullptr;
FitResult* Overfit::history_ = nullptr;

TEST_F(Overfit, FloatReachesTrainMaeBelow5mm) {
  RemnetObjective obj{RemnetConfig{}};
  ASSERT_EQ(history_->loss_history.size(), 200u);
  for (double l : history_->loss_history) EXPECT_TRUE(std::isfinite(l));
  EXPECT_LT(mean_abs_error(obj, *weights_, task_->examples), 0.005);
  EXPECT_LT(history_->loss_history.back(), history_->loss_history.front());
}

TEST_F(Overfit, QatExportBelow2cmAndExactVsSimulator) {
  const RemnetConfig config;
  ModelWeights w = *weights_;
  TrainPlan plan;
  plan.epochs = 10;
  plan.shuffle_seed = 9;
  Rng rng(12);
  const auto result = quant::train_qat(config, w, task_->examples, plan, rng);
  double sum = 0.0;
  for (const auto& ex : task_->examples) {
    const double q = quant::predict_int8(result.model, ex.input);
    EXPECT_EQ(q, quant::simulate_quantized(result.model, ex.input));
    sum += std::abs(q - ex.target);
  }
  EXPECT_LT(sum / static_cast<double>(task_->examples.size()), 0.02);
}

TEST(Qat, PassthroughEqualsFloatTraining) {
  const RemnetConfig config;
  LinearTask task(40);
  TrainPlan plan;
  plan.epochs = 3;
  plan.batch_size = 8;
  plan.shuffle_seed = 2;

  Rng r1(5);
  ModelWeights w1 = build(config, r1);
  ModelWeights w2 = w1;
  Rng r2 = r1;
  RemnetObjective obj(config);
  const auto plain = fit(obj, w1, task.examples, plan, r1);
  quant::QatOptions off;
  off.simulate = false;
  const auto qat = quant::train_qat(config, w2, task.examples, plan, r2, off);
  EXPECT_EQ(plain.loss_history, qat.history.loss_history);
  EXPECT_TRUE(w1 == w2);
}

}  // namespace
}  // namespace remnet
