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

// Fixed-point requantization: a real multiplier M in (0, 1) is carried as
// m0 * 2^(-31 - right_shift) with m0 in [2^30, 2^31). Both rounding steps
// round half away from zero.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>

#if defined(__SSE2__)
#include <emmintrin.h>
#endif

#include "remnet/common.hpp"

namespace remnet::quant {

struct FixedPointMultiplier {
  std::int32_t m0 = 0;
  std::uint8_t right_shift = 0;

  double value() const { return std::ldexp(static_cast<double>(m0), -31 - right_shift); }
  bool operator==(const FixedPointMultiplier&) const = default;
};

inline constexpr int kMaxRightShift = 62;

// Finds right_shift with M * 2^right_shift in [0.5, 1) and
// m0 = round(M * 2^right_shift * 2^31).
inline FixedPointMultiplier decompose_multiplier(double multiplier) {
  if (!(multiplier > 0.0) || !(multiplier < 1.0)) {
    raise<ConfigError>("decompose_multiplier: M must be in (0, 1), got ", multiplier);
  }
  int exponent = 0;
  const double fraction = std::frexp(multiplier, &exponent);  // multiplier = fraction * 2^exponent
  int shift = -exponent;
  if (shift > kMaxRightShift) raise<ConfigError>("decompose_multiplier: M=", multiplier, " too small");
  auto q = static_cast<std::int64_t>(round_half_away(std::ldexp(fraction, 31)));
  if (q == (std::int64_t{1} << 31)) {
    if (shift == 0) {
      q = std::numeric_limits<std::int32_t>::max();
    } else {
      q >>= 1;
      --shift;
    }
  }
  return FixedPointMultiplier{static_cast<std::int32_t>(q), static_cast<std::uint8_t>(shift)};
}

// round(a * b / 2^31), saturating the single overflow case a == b == INT32_MIN.
inline std::int32_t saturating_rounding_doubling_high_mul(std::int32_t a, std::int32_t b) {
  constexpr std::int32_t kMin = std::numeric_limits<std::int32_t>::min();
  if (a == kMin && b == kMin) [[unlikely]] return std::numeric_limits<std::int32_t>::max();
  const std::int64_t ab = static_cast<std::int64_t>(a) * static_cast<std::int64_t>(b);
  const std::int64_t sign = ab >> 63;  // 0 or -1
  const std::int64_t mag = (ab ^ sign) - sign;
  const std::int64_t r = (mag + (std::int64_t{1} << 30)) >> 31;
  return static_cast<std::int32_t>((r ^ sign) - sign);
}

// round(x / 2^shift)
inline std::int32_t rounding_right_shift(std::int32_t x, int shift) {
  if (shift == 0) return x;
  const std::int64_t v = x;
  const std::int64_t sign = v >> 63;
  const std::int64_t mag = (v ^ sign) - sign;
  const std::int64_t r = (mag + (std::int64_t{1} << (shift - 1))) >> shift;
  return static_cast<std::int32_t>((r ^ sign) - sign);
}

// Integer approximation of round(x * M); within 1 of the exact value.
inline std::int32_t fixed_point_mul(std::int32_t x, const FixedPointMultiplier& m) {
  return rounding_right_shift(saturating_rounding_doubling_high_mul(x, m.m0), m.right_shift);
}

// out[i] = clamp(zero_point + fixed_point_mul(acc[i], m), lo, 127) for a whole
// buffer. Works on |acc| with unsigned 64-bit products (both rounding steps
// are symmetric in the sign), which vectorizes; results equal the scalar path.
inline void requantize_block(const std::int32_t* acc, std::size_t n, const FixedPointMultiplier& m,
                             std::int32_t zero_point, std::int32_t lo, std::int8_t* out) {
  const auto m0 = static_cast<std::uint64_t>(static_cast<std::uint32_t>(m.m0));
  const unsigned shift = m.right_shift;
  const std::uint64_t round = shift ? (std::uint64_t{1} << (shift - 1)) : 0;
  std::size_t i = 0;
#if defined(__SSE2__)
  // Same steps on 8 lanes. The final clamps come from saturating packs: an
  // int16 saturation of y cannot change the result either.
  const __m128i vm0 = _mm_set1_epi64x(static_cast<long long>(m0));
  const __m128i vhalf = _mm_set1_epi64x(std::int64_t{1} << 30);
  const __m128i vround = _mm_set1_epi64x(static_cast<long long>(round));
  const __m128i vshift = _mm_cvtsi32_si128(static_cast<int>(shift));
  const __m128i vlow = _mm_set1_epi64x(0xFFFFFFFFLL);
  const __m128i vzero = _mm_set1_epi16(static_cast<short>(zero_point));
  const __m128i vlo = _mm_set1_epi16(static_cast<short>(lo));
  auto four = [&](const std::int32_t* p) {
    const __m128i a = _mm_loadu_si128(reinterpret_cast<const __m128i*>(p));
    const __m128i neg = _mm_srai_epi32(a, 31);
    const __m128i mag = _mm_sub_epi32(_mm_xor_si128(a, neg), neg);
    auto lanes = [&](__m128i x) {
      const __m128i high = _mm_srli_epi64(_mm_add_epi64(_mm_mul_epu32(x, vm0), vhalf), 31);
      return _mm_srl_epi64(_mm_add_epi64(high, vround), vshift);
    };
    const __m128i even = lanes(mag);
    const __m128i odd = lanes(_mm_srli_epi64(mag, 32));
    const __m128i r = _mm_or_si128(_mm_and_si128(even, vlow), _mm_slli_epi64(odd, 32));
    return _mm_sub_epi32(_mm_xor_si128(r, neg), neg);
  };
  for (; i + 8 <= n; i += 8) {
    const __m128i y = _mm_packs_epi32(four(acc + i), four(acc + i + 4));
    const __m128i v = _mm_max_epi16(_mm_adds_epi16(y, vzero), vlo);
    _mm_storel_epi64(reinterpret_cast<__m128i*>(out + i), _mm_packs_epi16(v, v));
  }
#endif
  for (; i < n; ++i) {
    const std::int32_t a = acc[i];
    const std::uint32_t neg = static_cast<std::uint32_t>(a >> 31);  // 0 or all ones
    const std::uint32_t mag = (static_cast<std::uint32_t>(a) ^ neg) - neg;
    const std::uint64_t high = (static_cast<std::uint64_t>(mag) * m0 + (std::uint64_t{1} << 30)) >> 31;
    const auto r = static_cast<std::uint32_t>((high + round) >> shift);
    const auto y = static_cast<std::int32_t>((r ^ neg) - neg);
    // Clamping y to +-512 first keeps the sum in 32 bits without changing
    // the result, since |zero_point| <= 128.
    const std::int32_t v = zero_point + (y < -512 ? -512 : (y > 512 ? 512 : y));
    out[i] = static_cast<std::int8_t>(v < lo ? lo : (v > 127 ? 127 : v));
  }
}

}  // namespace remnet::quant
