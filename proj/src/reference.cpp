// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fpemu/reference.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fpemu::reference {

namespace {

BigInt pow2_scaled(int exp) {
  BigInt one = 1;
  return one << (exp + kFracBits);
}

float nan_value() { return canonical_nan(); }

// finite = significand * 2^exp exactly, |significand| < 2^24
struct Split {
  long long significand = 0;
  int exp = 0;
};

Split split(float finite) {
  if (!std::isfinite(finite)) throw std::domain_error("reference: non-finite");
  if (finite == 0.0f) return {};
  int exp = 0;
  const float frac = std::frexp(std::fabs(finite), &exp);
  const auto significand = static_cast<long long>(std::ldexp(frac, 24));
  return {finite < 0 ? -significand : significand, exp - 24};
}

// v * 2^shift for a shift of either sign; negative shifts must be exact.
BigInt shifted(BigInt v, int shift) {
  if (shift >= 0) return v << shift;
  return v >> -shift;
}

}  // namespace

BigInt to_scaled(float finite) {
  const Split s = split(finite);
  return shifted(BigInt(s.significand), s.exp + kFracBits);
}

float round_scaled(const BigInt& scaled, bool negative, const FpFormat& format) {
  const float inf = std::numeric_limits<float>::infinity();
  const float signed_zero = negative ? -0.0f : 0.0f;
  if (scaled == 0) return signed_zero;
  const bool neg = scaled < 0;
  const BigInt mag = neg ? BigInt(-scaled) : scaled;
  const int p = format.mant_bits;

  // Binade of the exact value, then the grid spacing there.
  const int binade = static_cast<int>(boost::multiprecision::msb(mag)) - kFracBits;
  const int quantum_exp = (binade < format.emin() ? format.emin() : binade) - p;
  const BigInt quantum = pow2_scaled(quantum_exp);

  // The two neighbours lo <= mag < hi on that grid.
  const BigInt units = mag / quantum;
  const BigInt lo = units * quantum;
  const BigInt hi = lo + quantum;

  BigInt chosen_units;
  const BigInt twice = mag * 2;
  if (twice < lo + hi) {
    chosen_units = units;
  } else if (twice > lo + hi) {
    chosen_units = units + 1;
  } else {
    chosen_units = (units % 2 == 0) ? units : BigInt(units + 1);
  }

  if (chosen_units == 0) return neg ? -0.0f : 0.0f;

  const BigInt chosen = chosen_units * quantum;
  // max finite = (2^(p+1) - 1) * 2^(emax - p)
  const BigInt max_finite =
      ((BigInt(1) << (p + 1)) - 1) * pow2_scaled(format.emax() - p);
  if (chosen > max_finite) return neg ? -inf : inf;
  if (!format.denormals && chosen < pow2_scaled(format.emin())) {
    return neg ? -0.0f : 0.0f;
  }
  const float result = std::ldexp(chosen_units.convert_to<float>(), quantum_exp);
  return neg ? -result : result;
}

float roundfp(float x, const FpFormat& format) {
  if (std::isnan(x)) return nan_value();
  if (std::isinf(x)) return x;
  return round_scaled(to_scaled(x), std::signbit(x), format);
}

float fused_multiply_add(float a, float x, float y, const FpFormat& format) {
  if (std::isnan(a) || std::isnan(x) || std::isnan(y)) return nan_value();
  const bool product_negative = std::signbit(x) != std::signbit(y);
  if (std::isinf(x) || std::isinf(y)) {
    if (x == 0.0f || y == 0.0f) return nan_value();
    if (std::isinf(a) && std::signbit(a) != product_negative) return nan_value();
    return product_negative ? -std::numeric_limits<float>::infinity()
                            : std::numeric_limits<float>::infinity();
  }
  if (std::isinf(a)) return a;

  // x*y is a multiple of 2^-298, so the scaled product is an integer and
  // the right shift below drops only zero bits.
  const Split sx = split(x);
  const Split sy = split(y);
  const BigInt product = shifted(BigInt(sx.significand) * sy.significand,
                                 sx.exp + sy.exp + kFracBits);
  const BigInt sum = to_scaled(a) + product;
  bool negative = false;
  if (sum == 0) {
    const bool product_is_zero = product == 0;
    negative = product_is_zero && std::signbit(a) && product_negative;
  } else {
    negative = sum < 0;
  }
  return round_scaled(sum, negative, format);
}

float fmac8_dot(std::span<const float> w, std::span<const float> x,
                const FpFormat& format, int chunk) {
  if (w.size() != x.size()) throw std::invalid_argument("length mismatch");
  float master = 0.0f;
  float acc = 0.0f;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i % static_cast<std::size_t>(chunk) == 0) {
      master = fused_multiply_add(master, acc, 1.0f, formats::kBinary32);
      acc = 0.0f;
    }
    acc = fused_multiply_add(acc, w[i], x[i], format);
  }
  master = fused_multiply_add(master, acc, 1.0f, formats::kBinary32);
  return roundfp(master, format);
}

float fmacs_dot(std::span<const float> w, std::span<const float> x,
                const FpFormat& format) {
  if (w.size() != x.size()) throw std::invalid_argument("length mismatch");
  float acc = 0.0f;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc = fused_multiply_add(acc, w[i], x[i], formats::kBinary32);
  }
  return roundfp(acc, format);
}

}  // namespace fpemu::reference
