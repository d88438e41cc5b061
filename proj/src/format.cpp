// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fpemu/format.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace fpemu {

namespace {

int parse_int_field(std::string_view field, std::string_view spec) {
  int value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw FormatError("malformed format spec '" + std::string(spec) +
                      "': expected 1/e/p/{d|n}");
  }
  return value;
}

// floor(log2(|v|)) for finite nonzero v
int binade(float v) {
  int exp = 0;
  std::frexp(v, &exp);
  return exp - 1;
}

}  // namespace

FpFormat FpFormat::make(int exp_bits, int mant_bits, bool denormals) {
  if (exp_bits < kMinExpBits || exp_bits > kMaxExpBits) {
    throw FormatError("exponent bits must be in [2, 8], got " +
                      std::to_string(exp_bits));
  }
  if (mant_bits < kMinMantBits || mant_bits > kMaxMantBits) {
    throw FormatError("mantissa bits must be in [1, 23], got " +
                      std::to_string(mant_bits));
  }
  return FpFormat{exp_bits, mant_bits, denormals};
}

FpFormat FpFormat::parse(std::string_view spec) {
  std::string_view fields[4];
  std::size_t count = 0;
  std::size_t start = 0;
  while (true) {
    const auto slash = spec.find('/', start);
    if (count == 4) {
      throw FormatError("malformed format spec '" + std::string(spec) +
                        "': expected 1/e/p/{d|n}");
    }
    fields[count++] = spec.substr(start, slash - start);
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  if (count != 4) {
    throw FormatError("malformed format spec '" + std::string(spec) +
                      "': expected 1/e/p/{d|n}");
  }
  if (parse_int_field(fields[0], spec) != 1) {
    throw FormatError("format spec '" + std::string(spec) +
                      "': sign bits must be 1");
  }
  const int e = parse_int_field(fields[1], spec);
  const int p = parse_int_field(fields[2], spec);
  bool denormals = false;
  if (fields[3] == "d") {
    denormals = true;
  } else if (fields[3] != "n") {
    throw FormatError("format spec '" + std::string(spec) +
                      "': denormal flag must be 'd' or 'n'");
  }
  return make(e, p, denormals);
}

std::string FpFormat::to_string() const {
  return "1/" + std::to_string(exp_bits) + "/" + std::to_string(mant_bits) +
         (denormals ? "/d" : "/n");
}

FormatConstants format_constants(const FpFormat& format) {
  FormatConstants c;
  c.emin = format.emin();
  c.emax = format.emax();
  c.min_normal_exp = c.emin;
  c.min_normal = std::ldexp(1.0f, c.emin);
  if (format.denormals) {
    c.min_denormal_exp = c.emin - format.mant_bits;
    c.min_denormal = std::ldexp(1.0f, *c.min_denormal_exp);
  }
  // (2^(p+1) - 1) * 2^(emax - p), an integer significand so the product
  // is exact in binary32.
  const float significand =
      static_cast<float>((std::uint32_t{1} << (format.mant_bits + 1)) - 1);
  c.max_finite = std::ldexp(significand, c.emax - format.mant_bits);
  return c;
}

std::string_view to_string(FpClass c) noexcept {
  switch (c) {
    case FpClass::Zero: return "zero";
    case FpClass::Denormal: return "denormal";
    case FpClass::Normal: return "normal";
    case FpClass::Infinity: return "inf";
    case FpClass::NaN: return "nan";
  }
  return "?";
}

float canonical_nan() noexcept {
  return std::bit_cast<float>(std::uint32_t{0x7FC00000u});
}

FpClass classify(float v, const FpFormat& format) noexcept {
  if (std::isnan(v)) return FpClass::NaN;
  if (std::isinf(v)) return FpClass::Infinity;
  if (v == 0.0f) return FpClass::Zero;
  if (std::fabs(v) < std::ldexp(1.0f, format.emin())) return FpClass::Denormal;
  return FpClass::Normal;
}

bool is_representable(float v, const FpFormat& format) noexcept {
  if (!std::isfinite(v) || v == 0.0f) return true;
  const float mag = std::fabs(v);
  const auto c = format_constants(format);
  if (mag > c.max_finite) return false;
  const int e = binade(mag);
  if (e < c.emin && !format.denormals) return false;
  const int quantum_exp = std::max(e, c.emin) - format.mant_bits;
  const float scaled = std::ldexp(mag, -quantum_exp);
  return std::trunc(scaled) == scaled;
}

FpValue FpValue::make(float surrogate, const FpFormat& format) {
  if (!is_representable(surrogate, format)) {
    throw FormatError("value is not exactly representable in " +
                      format.to_string());
  }
  return FpValue(surrogate, format);
}

std::uint16_t encode16(float v, const FpFormat& format) {
  if (format.total_bits() != 16) {
    throw FormatError("encode16 requires a 16-bit format, got " +
                      format.to_string());
  }
  if (!is_representable(v, format)) {
    throw FormatError("encode16: value is not representable in " +
                      format.to_string());
  }
  const int p = format.mant_bits;
  const std::uint32_t exp_all_ones = (1u << format.exp_bits) - 1u;
  if (std::isnan(v)) {
    return static_cast<std::uint16_t>((exp_all_ones << p) | (1u << (p - 1)));
  }
  const std::uint32_t sign = std::signbit(v) ? 0x8000u : 0u;
  const float mag = std::fabs(v);
  std::uint32_t exp_field = 0;
  std::uint32_t mant_field = 0;
  if (std::isinf(mag)) {
    exp_field = exp_all_ones;
  } else if (mag != 0.0f) {
    const int e = binade(mag);
    if (e < format.emin()) {
      mant_field = static_cast<std::uint32_t>(
          std::ldexp(mag, -(format.emin() - p)));
    } else {
      exp_field = static_cast<std::uint32_t>(e + format.bias());
      mant_field =
          static_cast<std::uint32_t>(std::ldexp(mag, -(e - p))) - (1u << p);
    }
  }
  return static_cast<std::uint16_t>(sign | (exp_field << p) | mant_field);
}

FpValue decode16(std::uint16_t word, const FpFormat& format) {
  if (format.total_bits() != 16) {
    throw FormatError("decode16 requires a 16-bit format, got " +
                      format.to_string());
  }
  const int p = format.mant_bits;
  const std::uint32_t exp_all_ones = (1u << format.exp_bits) - 1u;
  const bool negative = (word & 0x8000u) != 0;
  const std::uint32_t exp_field = (word >> p) & exp_all_ones;
  const std::uint32_t mant_field = word & ((1u << p) - 1u);

  float mag = 0.0f;
  if (exp_field == exp_all_ones) {
    if (mant_field != 0) return FpValue::unchecked(canonical_nan(), format);
    mag = std::numeric_limits<float>::infinity();
  } else if (exp_field == 0) {
    if (format.denormals) {
      mag = std::ldexp(static_cast<float>(mant_field), format.emin() - p);
    }
  } else {
    const auto significand = static_cast<float>((1u << p) | mant_field);
    mag = std::ldexp(significand,
                     static_cast<int>(exp_field) - format.bias() - p);
  }
  return FpValue::unchecked(negative ? -mag : mag, format);
}

float parse_value(std::string_view text) {
  std::string_view body = text;
  bool negative = false;
  if (body.starts_with('-') || body.starts_with('+')) {
    negative = body.front() == '-';
    body.remove_prefix(1);
  }
  if (body.starts_with("2^")) {
    const auto digits = body.substr(2);
    int exp = 0;
    const auto* end = digits.data() + digits.size();
    auto [ptr, ec] = std::from_chars(digits.data(), end, exp);
    if (digits.empty() || ec != std::errc{} || ptr != end) {
      throw std::invalid_argument("bad power of two '" + std::string(text) + "'");
    }
    if (exp < -149 || exp > 127) {
      throw std::invalid_argument("'" + std::string(text) +
                                  "' is outside the binary32 range");
    }
    const float v = std::ldexp(1.0f, exp);
    return negative ? -v : v;
  }
  const std::string s(text);
  char* end = nullptr;
  const float v = std::strtof(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw std::invalid_argument("cannot parse value '" + s + "'");
  }
  return v;
}

std::string hex_float(float v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", static_cast<double>(v));
  return buf;
}

}  // namespace fpemu
