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

#include "remnet/nn/gradcheck.hpp"

#include <functional>
#include <vector>

namespace remnet::nn {
namespace {

struct Evaluation {
  double loss = 0.0;
  std::vector<bool> pattern;  // ReLU on/off state, empty for smooth layers
};

struct Problem {
  std::vector<Tensor> params;
  std::function<Evaluation(const Tensor&, const std::vector<Tensor>&)> eval;
  // Returns gradients for {input, params...}.
  std::function<std::vector<Tensor>(const Tensor&, const std::vector<Tensor>&)> grad;
};

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = rng.uniform(-1.0, 1.0);
  return t;
}

std::vector<double> projection_for(std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xF00D));
  std::vector<double> r(n);
  for (auto& v : r) v = rng.uniform(-1.0, 1.0);
  return r;
}

double project(std::span<const double> out, std::span<const double> r) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * r[i];
  return s;
}

std::vector<bool> sign_pattern(std::span<const double> v) {
  std::vector<bool> p(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) p[i] = v[i] > 0.0;
  return p;
}

Problem make_problem(const LayerSpec& spec, const Tensor& input, std::uint64_t seed) {
  Rng rng(seed);
  Problem p;
  switch (spec.kind) {
    case LayerKind::conv1d: {
      if (input.rank() != 2 || input.dim(1) != spec.in_channels) {
        raise<ShapeError>("gradient_check(conv1d): input ", input.shape_string(), " expected [Lx", spec.in_channels,
                          "]");
      }
      p.params = {random_tensor({spec.kernel, spec.in_channels, spec.out_channels}, rng),
                  random_tensor({spec.out_channels}, rng)};
      const std::size_t out_n = same_output_length(input.dim(0), spec.stride) * spec.out_channels;
      auto r = projection_for(out_n, seed);
      const std::size_t stride = spec.stride;
      p.eval = [r, stride](const Tensor& x, const std::vector<Tensor>& w) {
        auto out = conv1d_forward<double>(x, w[0], w[1].values(), stride);
        return Evaluation{project(out.values(), r), {}};
      };
      p.grad = [r, stride](const Tensor& x, const std::vector<Tensor>& w) {
        const std::size_t out_len = same_output_length(x.dim(0), stride);
        Tensor go({out_len, w[0].dim(2)}, r);
        auto g = conv1d_backward<double>(go, x, w[0], stride);
        return std::vector<Tensor>{g.input, g.weights, Tensor({g.bias.size()}, g.bias)};
      };
      break;
    }
    case LayerKind::dense: {
      if (input.size() != spec.in_channels) {
        raise<ShapeError>("gradient_check(dense): input size ", input.size(), " != in_channels ", spec.in_channels);
      }
      p.params = {random_tensor({spec.in_channels, spec.out_channels}, rng), random_tensor({spec.out_channels}, rng)};
      auto r = projection_for(spec.out_channels, seed);
      const Activation act = spec.activation;
      p.eval = [r, act](const Tensor& x, const std::vector<Tensor>& w) {
        auto out = dense_forward<double>(x.values(), w[0], w[1].values(), act);
        Evaluation e{project(out, r), {}};
        if (act == Activation::relu) {
          auto pre = dense_forward<double>(x.values(), w[0], w[1].values(), Activation::linear);
          e.pattern = sign_pattern(pre);
        }
        return e;
      };
      p.grad = [r, act](const Tensor& x, const std::vector<Tensor>& w) {
        auto out = dense_forward<double>(x.values(), w[0], w[1].values(), act);
        auto g = dense_backward<double>(r, x.values(), w[0], out, act);
        return std::vector<Tensor>{Tensor(x.shape(), g.input), g.weights, Tensor({g.bias.size()}, g.bias)};
      };
      break;
    }
    case LayerKind::gap: {
      if (input.rank() != 2) raise<ShapeError>("gradient_check(gap): input must be rank 2");
      auto r = projection_for(input.dim(1), seed);
      p.eval = [r](const Tensor& x, const std::vector<Tensor>&) {
        return Evaluation{project(global_avg_pool(x), r), {}};
      };
      p.grad = [r](const Tensor& x, const std::vector<Tensor>&) {
        return std::vector<Tensor>{global_avg_pool_backward<double>(r, x.dim(0))};
      };
      break;
    }
    case LayerKind::relu: {
      auto r = projection_for(input.size(), seed);
      p.eval = [r](const Tensor& x, const std::vector<Tensor>&) {
        return Evaluation{project(relu_forward(x.values()), r), sign_pattern(x.values())};
      };
      p.grad = [r](const Tensor& x, const std::vector<Tensor>&) {
        return std::vector<Tensor>{Tensor(x.shape(), relu_backward<double>(r, x.values()))};
      };
      break;
    }
    case LayerKind::sigmoid: {
      auto r = projection_for(input.size(), seed);
      p.eval = [r](const Tensor& x, const std::vector<Tensor>&) {
        return Evaluation{project(sigmoid_forward(x.values()), r), {}};
      };
      p.grad = [r](const Tensor& x, const std::vector<Tensor>&) {
        auto out = sigmoid_forward(x.values());
        return std::vector<Tensor>{Tensor(x.shape(), sigmoid_backward<double>(r, out))};
      };
      break;
    }
    case LayerKind::dropout: {
      auto r = projection_for(input.size(), seed);
      const double rate = spec.dropout_rate;
      const std::uint64_t mask_seed = derive_seed(seed, 0xD70);
      p.eval = [r, rate, mask_seed](const Tensor& x, const std::vector<Tensor>&) {
        Rng mask_rng(mask_seed);
        auto d = dropout_forward(x.values(), rate, mask_rng, true);
        return Evaluation{project(d.output, r), {}};
      };
      p.grad = [r, rate, mask_seed](const Tensor& x, const std::vector<Tensor>&) {
        Rng mask_rng(mask_seed);
        auto d = dropout_forward(x.values(), rate, mask_rng, true);
        return std::vector<Tensor>{Tensor(x.shape(), dropout_backward<double>(r, d.mask))};
      };
      break;
    }
    case LayerKind::add: {
      p.params = {random_tensor(input.shape(), rng)};
      auto r = projection_for(input.size(), seed);
      p.eval = [r](const Tensor& x, const std::vector<Tensor>& w) {
        return Evaluation{project(add_forward(x.values(), w[0].values()), r), {}};
      };
      p.grad = [r](const Tensor& x, const std::vector<Tensor>&) {
        return std::vector<Tensor>{Tensor(x.shape(), r), Tensor(x.shape(), r)};
      };
      break;
    }
    case LayerKind::flatten: {
      auto r = projection_for(input.size(), seed);
      p.eval = [r](const Tensor& x, const std::vector<Tensor>&) {
        auto flat = x.reshaped({x.size()});
        return Evaluation{project(flat.values(), r), {}};
      };
      p.grad = [r](const Tensor& x, const std::vector<Tensor>&) {
        return std::vector<Tensor>{Tensor({x.size()}, r).reshaped(x.shape())};
      };
      break;
    }
  }
  return p;
}

// Central difference with a one-sided fallback when the perturbation changes
// the ReLU pattern. Returns false when both sides cross a kink.
bool numeric_derivative(const std::function<Evaluation(double)>& f, double x0, double eps, double& out) {
  const Evaluation base = f(x0);
  const Evaluation plus = f(x0 + eps);
  const Evaluation minus = f(x0 - eps);
  const bool plus_ok = plus.pattern == base.pattern;
  const bool minus_ok = minus.pattern == base.pattern;
  if (plus_ok && minus_ok) {
    out = (plus.loss - minus.loss) / (2.0 * eps);
  } else if (plus_ok) {
    out = (plus.loss - base.loss) / eps;
  } else if (minus_ok) {
    out = (base.loss - minus.loss) / eps;
  } else {
    return false;
  }
  return true;
}

}  // namespace

double gradient_check(const LayerSpec& layer, const Tensor& input, double epsilon, std::uint64_t seed) {
  if (!(epsilon > 0.0)) raise<ConfigError>("gradient_check: epsilon must be positive");
  check_finite<double>(input.values(), "gradient_check(input)");
  Problem p = make_problem(layer, input, seed);
  const std::vector<Tensor> analytic = p.grad(input, p.params);

  double worst = 0.0;
  Tensor x = input;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    double numeric = 0.0;
    const bool ok = numeric_derivative(
        [&](double v) {
          x[i] = v;
          auto e = p.eval(x, p.params);
          x[i] = x0;
          return e;
        },
        x0, epsilon, numeric);
    if (ok) worst = std::max(worst, relative_error(analytic[0][i], numeric));
  }
  for (std::size_t t = 0; t < p.params.size() && t + 1 < analytic.size(); ++t) {
    std::vector<Tensor> params = p.params;
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double w0 = params[t][i];
      double numeric = 0.0;
      const bool ok = numeric_derivative(
          [&](double v) {
            params[t][i] = v;
            auto e = p.eval(input, params);
            params[t][i] = w0;
            return e;
          },
          w0, epsilon, numeric);
      if (ok) worst = std::max(worst, relative_error(analytic[t + 1][i], numeric));
    }
  }
  if (!std::isfinite(worst)) raise<NonFiniteError>("gradient_check: non-finite error");
  return worst;
}

}  // namespace remnet::nn
