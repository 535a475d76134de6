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
#include <vector>

#include "remnet/nn/gradcheck.hpp"
#include "remnet/nn/layers.hpp"
#include "remnet/rng.hpp"
#include "test_support.hpp"

namespace remnet::nn {
namespace {

using remnet::testing::layer_cases;
using remnet::testing::random_map;


// Direct evaluation of the convolution sum, one output element at a time.
double conv_oracle(const Tensor& x, const Tensor& w, std::span<const double> b, std::size_t stride, std::size_t t,
                   std::size_t o) {
  const auto k = static_cast<std::ptrdiff_t>(w.dim(0));
  double acc = b[o];
  for (std::ptrdiff_t j = 0; j < k; ++j) {
    const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(stride * t) + j - k / 2;
    if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(x.dim(0))) continue;
    for (std::size_t c = 0; c < x.dim(1); ++c) {
      acc += x(static_cast<std::size_t>(pos), c) * w[(static_cast<std::size_t>(j) * w.dim(1) + c) * w.dim(2) + o];
    }
  }
  return acc;
}

TEST(Conv1d, SameShapes) {
  Rng rng(1);
  const Tensor x = random_map(128, 1, rng);
  Tensor w({7, 1, 16});
  std::vector<double> b(16, 0.0);
  EXPECT_EQ(conv1d_forward(x, w, std::span<const double>(b), 1).shape(), (std::vector<std::size_t>{128, 16}));
  const Tensor x16 = random_map(128, 16, rng);
  Tensor w3({3, 16, 16});
  EXPECT_EQ(conv1d_forward(x16, w3, std::span<const double>(b), 2).shape(), (std::vector<std::size_t>{64, 16}));
}

TEST(Conv1d, StrideTwoLengthIsCeilingForAllLengths) {
  Tensor w({3, 1, 1});
  std::vector<double> b(1, 0.0);
  for (std::size_t length = 1; length <= 256; ++length) {
    const Tensor x({length, 1}, 1.0);
    EXPECT_EQ(conv1d_forward(x, w, std::span<const double>(b), 2).dim(0), (length + 1) / 2) << length;
  }
}

TEST(Conv1d, ZeroInputGivesBias) {
  Rng rng(2);
  const Tensor x({20, 3});
  Tensor w({5, 3, 4});
  for (double& v : w.values()) v = rng.uniform(-1.0, 1.0);
  const std::vector<double> b{0.5, -1.0, 2.0, 0.0};
  const auto y = conv1d_forward(x, w, std::span<const double>(b), 1);
  for (std::size_t t = 0; t < 20; ++t) {
    for (std::size_t o = 0; o < 4; ++o) EXPECT_EQ(y(t, o), b[o]);
  }
}

TEST(Conv1d, MatchesDirectSum) {
  Rng rng(3);
  for (std::size_t stride : {1u, 2u}) {
    for (std::size_t k : {1u, 3u, 7u}) {
      const Tensor x = random_map(13, 2, rng);
      Tensor w({k, 2, 3});
      for (double& v : w.values()) v = rng.uniform(-1.0, 1.0);
      const std::vector<double> b{0.1, 0.2, -0.3};
      const auto y = conv1d_forward(x, w, std::span<const double>(b), stride);
      for (std::size_t t = 0; t < y.dim(0); ++t) {
        for (std::size_t o = 0; o < 3; ++o) EXPECT_NEAR(y(t, o), conv_oracle(x, w, b, stride, t, o), 1e-14);
      }
    }
  }
}

TEST(Conv1d, ShapeErrorsNameTheDims) {
  const Tensor x({10, 2});
  Tensor w({3, 4, 1});
  std::vector<double> b(1, 0.0);
  try {
    conv1d_forward(x, w, std::span<const double>(b), 1);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("input channels 2 != weight in_channels 4"), std::string::npos);
  }
  Tensor even({2, 2, 1});
  EXPECT_THROW(conv1d_forward(x, even, std::span<const double>(b), 1), ShapeError);
}

TEST(Conv1d, BackwardScalarAndZero) {
  const Tensor x({1, 1}, std::vector<double>{0.7});
  const Tensor w({1, 1, 1}, std::vector<double>{-2.0});
  const Tensor g({1, 1}, std::vector<double>{1.5});
  const auto grads = conv1d_backward(g, x, w, 1);
  EXPECT_DOUBLE_EQ(grads.weights[0], 1.5 * 0.7);
  EXPECT_DOUBLE_EQ(grads.input[0], 1.5 * -2.0);
  EXPECT_DOUBLE_EQ(grads.bias[0], 1.5);

  Rng rng(4);
  const Tensor xr = random_map(16, 2, rng);
  Tensor wr({3, 2, 2});
  for (double& v : wr.values()) v = rng.uniform(-1.0, 1.0);
  const auto zero = conv1d_backward(Tensor({16, 2}), xr, wr, 1);
  for (double v : zero.input.values()) EXPECT_EQ(v, 0.0);
  for (double v : zero.weights.values()) EXPECT_EQ(v, 0.0);
  for (double v : zero.bias) EXPECT_EQ(v, 0.0);
}

// Central differences computed here, independent of gradient_check.
TEST(Conv1d, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  Tensor x = random_map(16, 2, rng);
  Tensor w({3, 2, 3});
  for (double& v : w.values()) v = rng.uniform(-1.0, 1.0);
  std::vector<double> b{0.1, -0.2, 0.3};
  Tensor r({8, 3});
  for (double& v : r.values()) v = rng.uniform(-1.0, 1.0);
  auto objective = [&] {
    const auto y = conv1d_forward(x, w, std::span<const double>(b), 2);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
    return s;
  };
  const auto g = conv1d_backward(r, x, w, 2);
  const double eps = 1e-6;
  auto fd = [&](double& p) {
    const double keep = p;
    p = keep + eps;
    const double up = objective();
    p = keep - eps;
    const double down = objective();
    p = keep;
    return (up - down) / (2 * eps);
  };
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(relative_error(g.input[i], fd(x[i])), 1e-5);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LE(relative_error(g.weights[i], fd(w[i])), 1e-5);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_LE(relative_error(g.bias[i], fd(b[i])), 1e-5);
}

TEST(Dense, Examples) {
  const Tensor zero({4, 3});
  const std::vector<double> x{1.0, -2.0, 3.0, 0.5};
  const std::vector<double> nob(3, 0.0);
  for (double v : dense_forward<double>(x, zero, nob, Activation::sigmoid)) EXPECT_EQ(v, 0.5);

  Tensor eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye(i, i) = 1.0;
  const std::vector<double> b4(4, 0.0);
  EXPECT_EQ(dense_forward<double>(x, eye, b4, Activation::linear), x);

  Tensor big({1, 2}, std::vector<double>{1000.0, -1000.0});
  const std::vector<double> one{1.0};
  const std::vector<double> b2(2, 0.0);
  for (double v : dense_forward<double>(one, big, b2, Activation::sigmoid)) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_THROW(dense_forward<double>(std::vector<double>{1.0, 2.0}, eye, b4, Activation::linear), ShapeError);
}

TEST(Pool, Examples) {
  const Tensor c({5, 2}, 3.25);
  for (double v : global_avg_pool(c)) EXPECT_EQ(v, 3.25);
  const Tensor two({2, 1}, std::vector<double>{0.0, 1.0});
  EXPECT_EQ(global_avg_pool(two)[0], 0.5);
  const std::vector<double> g{4.0, -8.0};
  const auto back = global_avg_pool_backward<double>(g, 4);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(back(t, 0), 1.0);
    EXPECT_EQ(back(t, 1), -2.0);
  }
}

TEST(Dropout, Examples) {
  Rng rng(6);
  const std::vector<double> x{1.0, -2.0, 3.0};
  EXPECT_EQ(dropout_forward<double>(x, 0.0, rng, true).output, x);
  EXPECT_EQ(dropout_forward<double>(x, 0.7, rng, false).output, x);

  const std::vector<double> ones(100000, 1.0);
  Rng seeded(42);
  const auto r = dropout_forward<double>(ones, 0.5, seeded, true);
  double mean = 0.0;
  for (double v : r.output) mean += v;
  mean /= static_cast<double>(ones.size());
  EXPECT_GE(mean, 0.98);
  EXPECT_LE(mean, 1.02);
  EXPECT_THROW(dropout_forward<double>(x, 1.0, rng, true), ConfigError);
}

TEST(Activations, ReluIdempotentSigmoidOpen) {
  Rng rng(7);
  std::vector<double> x(1000);
  for (double& v : x) v = rng.uniform(-50.0, 50.0);
  const auto once = relu_forward<double>(x);
  EXPECT_EQ(relu_forward<double>(once), once);
  x.push_back(800.0);
  x.push_back(-800.0);
  for (double s : sigmoid_forward<double>(x)) {
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
  }
}

TEST(Purity, DropoutRepeatsWithSameRngState) {
  std::vector<double> x(64, 2.0);
  Rng a(9), b(9);
  EXPECT_EQ(dropout_forward<double>(x, 0.3, a, true).output, dropout_forward<double>(x, 0.3, b, true).output);
}

TEST(Purity, NonFiniteIsAnError) {
  const std::vector<double> x{std::numeric_limits<double>::infinity()};
  const Tensor w({1, 1}, std::vector<double>{1.0});
  const std::vector<double> b{0.0};
  EXPECT_THROW(dense_forward<double>(x, w, b, Activation::linear), NonFiniteError);
}

TEST(GradientCheck, EveryLayerKindTwentySeeds) {
  for (const auto& c : layer_cases()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(1000 + seed);
      const Tensor x = random_map(c.length, c.spec.in_channels, rng);
      const double err = gradient_check(c.spec, x, 1e-6, seed);
      EXPECT_LE(err, 1e-5) << "kind " << static_cast<int>(c.spec.kind) << " seed " << seed;
    }
  }
}

TEST(GradientCheck, DetectsABrokenGradient) {
  // relative_error itself: a gradient off by 1% must be reported as such.
  EXPECT_NEAR(relative_error(1.01, 1.0), 0.01 / 1.01, 1e-15);
  EXPECT_NEAR(relative_error(1e-6, 0.0), 1e-3, 1e-15);
}

}  // namespace
}  // namespace remnet::nn
