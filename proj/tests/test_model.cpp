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

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "remnet/model/checkpoint.hpp"
#include "remnet/model/inference_f32.hpp"
#include "remnet/model/mlp.hpp"
#include "remnet/model/remnet.hpp"
#include "remnet/rng.hpp"
#include "test_support.hpp"

namespace remnet {
namespace {

// Layer-by-layer enumeration: conv k*Cin*Cout + Cout, dense n*m + m.
std::size_t enumerate_params(const RemnetConfig& c) {
  const std::size_t f = c.filters;
  const std::size_t bottleneck = c.filters / c.se_reduction;
  const std::size_t stem = c.first_kernel * 1 * f + f;
  const std::size_t body = c.body_kernel * f * f + f;
  const std::size_t se = (f * bottleneck + bottleneck) + (bottleneck * f + f);
  const std::size_t branches = (c.body_kernel * f * f + f) + (c.branch2_kernel * f * f + f);
  const std::size_t head = (c.input_length >> c.modules) * f + 1;
  return stem + c.modules * (body + se + branches) + head;
}

TEST(Architecture, DefaultHas6151Parameters) {
  const auto t0 = std::chrono::steady_clock::now();
  const RemnetConfig config;
  Rng rng(1);
  const ModelWeights w = build(config, rng);
  EXPECT_EQ(w.total_params(), 6151u);
  EXPECT_EQ(parameter_count(config), 6151u);
  EXPECT_EQ(enumerate_params(config), 6151u);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1.0);
}

TEST(Architecture, ShorterWindowEnumeration) {
  RemnetConfig config;
  config.input_length = 64;
  EXPECT_EQ(config.head_inputs(), 128u);
  EXPECT_EQ(enumerate_params(config), 6023u);
  EXPECT_EQ(parameter_count(config), 6023u);
}

TEST(Architecture, CountsAgreeOnRandomConfigs) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    RemnetConfig c;
    c.modules = static_cast<std::uint32_t>(1 + rng.below(4));
    c.input_length = static_cast<std::uint32_t>((1 + rng.below(8)) << c.modules);
    c.se_reduction = static_cast<std::uint32_t>(1 + rng.below(4));
    c.filters = c.se_reduction * static_cast<std::uint32_t>(2 + rng.below(6));
    c.first_kernel = static_cast<std::uint32_t>(1 + 2 * rng.below(4));
    c.body_kernel = static_cast<std::uint32_t>(1 + 2 * rng.below(3));
    c.branch2_kernel = static_cast<std::uint32_t>(1 + 2 * rng.below(2));
    ASSERT_NO_THROW(c.validate());
    EXPECT_EQ(remnet_layout(c).total_params(), parameter_count(c));
    EXPECT_EQ(parameter_count(c), enumerate_params(c));
  }
}

TEST(Architecture, InvalidConfigs) {
  RemnetConfig c;
  c.filters = 8;
  c.se_reduction = 8;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.input_length = 100;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.filters = 12;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.body_kernel = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Architecture, TemporalLengthHalvesPerModule) {
  const RemnetConfig config;
  const auto w = testing::random_model(config, 3);
  const auto x = testing::random_inputs(1, 128, 4)[0];
  Rng rng(0);
  ForwardTrace tr;
  forward(config, w, x, Mode::infer, rng, nullptr, &tr);
  ASSERT_EQ(tr.modules.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(tr.modules[i].x.dim(0), 128u >> i);
    EXPECT_EQ(tr.modules[i].b1.dim(0), 128u >> (i + 1));
  }
  EXPECT_EQ(tr.head_in.size(), 16u * 16u);
}

TEST(Forward, ZeroHeadGivesZero) {
  const RemnetConfig config;
  auto w = testing::random_model(config, 5);
  w[param::head_w(config.modules)].fill(0.0);
  w[param::head_b(config.modules)].fill(0.0);
  Rng rng(0);
  for (const auto& x : testing::random_inputs(5, 128, 6)) EXPECT_EQ(forward(config, w, x, Mode::infer, rng), 0.0);
}

TEST(Forward, InferIsPure) {
  const RemnetConfig config;
  const auto w = testing::random_model(config, 7);
  const auto x = testing::random_inputs(1, 128, 8)[0];
  Rng a(1), b(999);
  EXPECT_EQ(forward(config, w, x, Mode::infer, a), forward(config, w, x, Mode::infer, b));
  std::vector<double> short_input(127, 0.0);
  EXPECT_THROW(forward(config, w, short_input, Mode::infer, a), ShapeError);
}

// Recorded from this implementation once the gradient checks passed.
TEST(Forward, GoldenValue) {
  const RemnetConfig config;
  Rng init(2024);
  const ModelWeights w = build(config, init);
  std::vector<double> x(128);
  Rng data(77);
  for (double& v : x) v = data.uniform();
  Rng rng(0);
  EXPECT_NEAR(forward(config, w, x, Mode::infer, rng), -0.081091016438542399, 1e-12);
}

TEST(Forward, SeGateInOpenIntervalAndWiring) {
  const RemnetConfig config;
  auto w = testing::random_model(config, 9);
  const auto x = testing::random_inputs(1, 128, 10)[0];
  Rng rng(0);
  ForwardTrace tr;
  forward(config, w, x, Mode::infer, rng, nullptr, &tr);
  for (const auto& m : tr.modules) {
    for (double s : m.s) {
      EXPECT_GT(s, 0.0);
      EXPECT_LT(s, 1.0);
    }
  }
  for (std::size_t i = 0; i < config.modules; ++i) {
    w[param::module(i, param::se2_w)].fill(0.0);
    w[param::module(i, param::se2_b)].fill(0.0);
  }
  ForwardTrace half;
  forward(config, w, x, Mode::infer, rng, nullptr, &half);
  for (const auto& m : half.modules) {
    for (double s : m.s) EXPECT_EQ(s, 0.5);
    for (std::size_t j = 0; j < m.f.size(); ++j) EXPECT_EQ(m.e[j], 0.5 * m.f[j]);
  }
}

TEST(Backward, PerfectPredictionsGiveZeroLoss) {
  const RemnetConfig config;
  const auto w = testing::random_model(config, 11);
  const auto inputs = testing::random_inputs(4, 128, 12);
  std::vector<Example> batch;
  for (const auto& x : inputs) {
    Rng r(0);
    batch.push_back({x, forward(config, w, x, Mode::infer, r)});
  }
  RemnetConfig no_dropout = config;
  no_dropout.dropout_rate = 0.0;
  Rng rng(1);
  const auto lg = backward(no_dropout, w, batch, rng);
  EXPECT_EQ(lg.loss, 0.0);
  for (const auto& p : lg.grads.params()) {
    for (double v : p.value.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Backward, DuplicatedBatchHasSameLoss) {
  RemnetConfig config;
  config.dropout_rate = 0.0;
  const auto w = testing::random_model(config, 13);
  const auto x = testing::random_inputs(1, 128, 14)[0];
  const std::vector<Example> one{{x, 0.3}};
  const std::vector<Example> three{{x, 0.3}, {x, 0.3}, {x, 0.3}};
  Rng a(1), b(1);
  const auto l1 = backward(config, w, one, a);
  const auto l3 = backward(config, w, three, b);
  EXPECT_DOUBLE_EQ(l1.loss, l3.loss);
  for (std::size_t t = 0; t < w.tensor_count(); ++t) {
    for (std::size_t i = 0; i < w[t].size(); ++i) EXPECT_NEAR(l1.grads[t][i], l3.grads[t][i], 1e-15);
  }
}

TEST(Backward, EndToEndMatchesFiniteDifferences) {
  RemnetConfig small;
  small.input_length = 32;
  small.filters = 8;
  small.modules = 2;
  small.se_reduction = 4;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_LE(testing::remnet_e2e_gradient_error(small, seed), 1e-4) << seed;
  }
  EXPECT_LE(testing::remnet_e2e_gradient_error(RemnetConfig{}, 100), 1e-4);
}

TEST(Mlp, ParameterCountAndZeroOutput) {
  const MlpConfig c;
  EXPECT_EQ(mlp_parameter_count(c), 157u * 64 + 64 + 64 * 64 + 64 + 64 + 1);
  EXPECT_EQ(mlp_parameter_count(c), 14337u);
  Rng rng(1);
  ModelWeights w = mlp_build(c, rng);
  EXPECT_EQ(w.total_params(), 14337u);
  w.set_zero();
  EXPECT_EQ(mlp_forward(c, w, testing::random_inputs(1, 157, 2)[0]), 0.0);
}

TEST(Mlp, GradientCheck) {
  MlpConfig c;
  c.input_dim = 20;
  c.hidden = 12;
  for (std::uint64_t seed = 0; seed < 20; ++seed) EXPECT_LE(testing::mlp_e2e_gradient_error(c, seed), 1e-5) << seed;
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() / ("remnet_ckpt_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST_F(CheckpointTest, SaveLoadSaveIsByteIdentical) {
  const RemnetConfig config;
  const auto w = round_to_float32(testing::random_model(config, 15));
  save_checkpoint(w, config, dir_ / "a.remn");
  const auto ck = load_checkpoint(dir_ / "a.remn");
  EXPECT_EQ(ck.config, config);
  EXPECT_TRUE(ck.weights == w);
  save_checkpoint(ck.weights, ck.config, dir_ / "b.remn");
  EXPECT_EQ(slurp(dir_ / "a.remn"), slurp(dir_ / "b.remn"));
  const auto size = std::filesystem::file_size(dir_ / "a.remn");
  EXPECT_GE(size, 6151u * 4);
  EXPECT_LT(size, 26u * 1024);
}

TEST_F(CheckpointTest, CorruptFilesAreRejected) {
  const RemnetConfig config;
  auto bytes = encode_checkpoint(testing::random_model(config, 16), config);
  auto bad = bytes;
  bad[0] ^= 0xFF;
  try {
    decode_checkpoint(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
  }
  auto version = bytes;
  version[4] = 99;
  EXPECT_THROW(decode_checkpoint(version), FormatError);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  EXPECT_THROW(decode_checkpoint(truncated), FormatError);
  RemnetConfig other;
  other.input_length = 64;
  EXPECT_THROW(encode_checkpoint(testing::random_model(config, 16), other), ShapeError);
}

TEST(Float32, TracksDoublePrecision) {
  const RemnetConfig config;
  const auto w = testing::random_model(config, 17);
  const Float32Model f(config, w);
  Rng rng(0);
  for (const auto& x : testing::random_inputs(20, 128, 18)) {
    const double ref = forward(config, w, x, Mode::infer, rng);
    EXPECT_NEAR(f.run(std::span<const double>(x)), ref, 1e-5 * std::max(1.0, std::abs(ref)));
  }
}

TEST(Float16, RoundsToHalfGrid) {
  EXPECT_EQ(round_float_to_half(1.0f), 1.0f);
  EXPECT_EQ(round_float_to_half(1.0f + 1.0f / 4096), 1.0f);  // below half an ulp (2^-11)
  EXPECT_EQ(round_float_to_half(1.0f + 3.0f / 2048), 1.0f + 2.0f / 1024);
  EXPECT_EQ(round_float_to_half(65504.0f), 65504.0f);
}

}  // namespace
}  // namespace remnet
