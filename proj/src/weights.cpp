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

#include "remnet/model/weights.hpp"

#include "remnet/common.hpp"

namespace remnet {

nn::Tensor& ModelWeights::add(std::string name, std::vector<std::size_t> shape) {
  params_.push_back(Parameter{std::move(name), nn::Tensor(std::move(shape))});
  return params_.back().value;
}

std::size_t ModelWeights::total_params() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

nn::Tensor& ModelWeights::at(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p.value;
  }
  raise<ShapeError>("no parameter named '", name, "'");
}

const nn::Tensor& ModelWeights::at(std::string_view name) const {
  return const_cast<ModelWeights*>(this)->at(name);
}

ModelWeights ModelWeights::zeros_like() const {
  ModelWeights z;
  z.params_.reserve(params_.size());
  for (const auto& p : params_) z.add(p.name, p.value.shape());
  return z;
}

bool ModelWeights::same_layout(const ModelWeights& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name || params_[i].value.shape() != other.params_[i].value.shape()) {
      return false;
    }
  }
  return true;
}

void ModelWeights::set_zero() {
  for (auto& p : params_) p.value.fill(0.0);
}

void ModelWeights::add_scaled(const ModelWeights& other, double scale) {
  if (!same_layout(other)) raise<ShapeError>("add_scaled: weight layouts differ");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].value.values();
    auto src = other.params_[i].value.values();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
}

bool ModelWeights::operator==(const ModelWeights& other) const {
  if (!same_layout(other)) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].value.storage() != other.params_[i].value.storage()) return false;
  }
  return true;
}

}  // namespace remnet
