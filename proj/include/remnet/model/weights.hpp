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

#include <string>
#include <string_view>
#include <vector>

#include "remnet/nn/tensor.hpp"

namespace remnet {

struct Parameter {
  std::string name;
  nn::Tensor value;
};

// Ordered store of named parameter tensors. The order is part of the
// checkpoint contract and is fixed by the model builder.
class ModelWeights {
 public:
  ModelWeights() = default;

  nn::Tensor& add(std::string name, std::vector<std::size_t> shape);

  std::size_t tensor_count() const { return params_.size(); }
  std::size_t total_params() const;

  nn::Tensor& operator[](std::size_t i) { return params_[i].value; }
  const nn::Tensor& operator[](std::size_t i) const { return params_[i].value; }
  const std::string& name(std::size_t i) const { return params_[i].name; }

  nn::Tensor& at(std::string_view name);
  const nn::Tensor& at(std::string_view name) const;

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }

  // Same names and shapes, all zeros.
  ModelWeights zeros_like() const;
  bool same_layout(const ModelWeights& other) const;

  void set_zero();
  // this += scale * other
  void add_scaled(const ModelWeights& other, double scale);

  bool operator==(const ModelWeights& other) const;

 private:
  std::vector<Parameter> params_;
};

}  // namespace remnet
