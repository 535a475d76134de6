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

#include <cmath>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

namespace remnet {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent tensor or layer dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced by a numeric op.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameters (model config, training plan, solver options).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data that fails validation (CSV rows, scenario files, empty sets).
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed or incompatible binary file.
class FormatError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace detail

template <typename E = Error, typename... Args>
[[noreturn]] void raise(Args&&... args) {
  throw E(detail::concat(std::forward<Args>(args)...));
}

template <typename T>
void check_finite(std::span<const T> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      raise<NonFiniteError>(what, ": non-finite value at element ", i);
    }
  }
}

// Rounds half away from zero. Every rounding step in the quantized path uses
// this mode so that integer and float routes agree bit for bit.
inline double round_half_away(double x) { return std::round(x); }

}  // namespace remnet
