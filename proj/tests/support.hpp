// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef FPEMU_TESTS_SUPPORT_HPP
#define FPEMU_TESTS_SUPPORT_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fpemu/format.hpp"
#include "fpemu/rounding.hpp"

namespace fpemu::testing {

inline std::uint32_t bits(float v) { return std::bit_cast<std::uint32_t>(v); }

inline float p2(int k) { return std::ldexp(1.0f, k); }

inline const std::vector<FpFormat>& sixteen_bit_formats() {
  static const std::vector<FpFormat> all = {formats::kHalf, formats::kHalfFtz,
                                            formats::kE6M9, formats::kE6M9Ftz,
                                            formats::kBfloat16};
  return all;
}

/// A random binary32 input biased towards the interesting region of
/// `fmt`: around its denormal and overflow thresholds, near ties, and a
/// share of raw bit patterns (including inf and NaN).
inline float interesting_float(std::mt19937_64& rng, const FpFormat& fmt) {
  const std::uint64_t r = rng();
  switch (r % 5) {
    case 0:
      return std::bit_cast<float>(static_cast<std::uint32_t>(r >> 32));
    case 1: {
      // Exponent near the bottom of the format.
      const int e = fmt.emin() - fmt.mant_bits - 3 + static_cast<int>((r >> 8) % (fmt.mant_bits + 8));
      const float m = 1.0f + static_cast<float>((r >> 32) & 0x7FFFFF) * 0x1p-23f;
      return std::ldexp((r & 0x10) ? -m : m, std::max(e, -149));
    }
    case 2: {
      // Near the top.
      const int e = fmt.emax() - 2 + static_cast<int>((r >> 8) % 4);
      const float m = 1.0f + static_cast<float>((r >> 32) & 0x7FFFFF) * 0x1p-23f;
      return std::ldexp((r & 0x10) ? -m : m, std::min(e, 127));
    }
    case 3: {
      // Exact ties and their neighbours at a random representable point.
      const int e = fmt.emin() + static_cast<int>((r >> 8) % (fmt.emax() - fmt.emin() + 1));
      const std::uint32_t mant = static_cast<std::uint32_t>(r >> 32) & ((1u << fmt.mant_bits) - 1);
      const float on_grid = std::ldexp(1.0f + std::ldexp(static_cast<float>(mant), -fmt.mant_bits), e);
      const float tie = on_grid + std::ldexp(1.0f, e - fmt.mant_bits - 1);
      if (!std::isfinite(tie)) return on_grid;
      const int nudge = static_cast<int>((r >> 4) % 3) - 1;
      float v = tie;
      if (nudge < 0) v = std::nextafter(tie, 0.0f);
      if (nudge > 0) v = std::nextafter(tie, INFINITY);
      return (r & 0x8) ? -v : v;
    }
    default: {
      const float m = 1.0f + static_cast<float>((r >> 32) & 0x7FFFFF) * 0x1p-23f;
      const int e = static_cast<int>((r >> 8) % 60) - 30;
      return std::ldexp((r & 0x10) ? -m : m, e);
    }
  }
}

/// A random finite value of `fmt`, drawn uniformly over encodings.
inline float random_member(std::mt19937_64& rng, const FpFormat& fmt) {
  for (;;) {
    const auto word = static_cast<std::uint16_t>(rng());
    const float v = decode16(word, fmt).value();
    if (std::isfinite(v)) return v;
  }
}

/// True if x*y (computed exactly) is a member of `fmt`, so that rounding
/// the product into `fmt` loses nothing.
inline bool product_is_exact(float x, float y, const FpFormat& fmt) {
  const double p = static_cast<double>(x) * static_cast<double>(y);
  const float pf = static_cast<float>(p);
  if (std::isnan(p)) return false;
  return static_cast<double>(pf) == p && is_representable(pf, fmt);
}

}  // namespace fpemu::testing

#endif  // FPEMU_TESTS_SUPPORT_HPP
