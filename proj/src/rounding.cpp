// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fpemu/rounding.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace fpemu {

namespace detail {

namespace {

int bit_width(u128 v) noexcept {
  const auto hi = static_cast<std::uint64_t>(v >> 64);
  if (hi != 0) return 64 + std::bit_width(hi);
  return std::bit_width(static_cast<std::uint64_t>(v));
}

float signed_zero(bool negative) noexcept { return negative ? -0.0f : 0.0f; }

}  // namespace

Dyadic decompose(float finite) noexcept {
  const auto bits = std::bit_cast<std::uint32_t>(finite);
  const std::uint32_t exp_field = (bits >> 23) & 0xFFu;
  const std::uint32_t mant_field = bits & 0x7FFFFFu;
  Dyadic d;
  d.negative = (bits >> 31) != 0;
  if (exp_field == 0) {
    d.mag = mant_field;
    d.exp = -149;
  } else {
    d.mag = mant_field | 0x800000u;
    d.exp = static_cast<int>(exp_field) - 150;
  }
  return d;
}

RoundingOutcome round_dyadic(const Dyadic& d, const FpFormat& format) noexcept {
  const int p = format.mant_bits;
  const int emin = format.emin();
  const int emax = format.emax();

  if (d.mag == 0) {
    RoundingFlags flags = d.sticky
        ? (RoundingFlag::Rounded | RoundingFlag::UnderflowedToZero)
        : RoundingFlags(RoundingFlag::Exact);
    return {FpValue::unchecked(signed_zero(d.negative), format), flags};
  }

  const int msb_exp = d.exp + bit_width(d.mag) - 1;
  const int quantum_exp = std::max(msb_exp, emin) - p;
  const int shift = quantum_exp - d.exp;

  u128 q = 0;
  bool inexact = d.sticky;
  if (shift <= 0) {
    q = d.mag << -shift;
  } else if (shift >= 128) {
    // mag < 2^127 <= half a quantum
    inexact = true;
  } else {
    q = d.mag >> shift;
    const u128 rem = d.mag & ((u128{1} << shift) - 1);
    const u128 half = u128{1} << (shift - 1);
    inexact = inexact || rem != 0;
    if (rem > half || (rem == half && (d.sticky || (q & 1) != 0))) ++q;
  }

  RoundingFlags flags;
  if (inexact) flags |= RoundingFlag::Rounded;

  if (q == 0) {
    flags |= RoundingFlag::UnderflowedToZero;
    return {FpValue::unchecked(signed_zero(d.negative), format), flags};
  }

  const int result_exp = quantum_exp + bit_width(q) - 1;
  if (result_exp > emax) {
    flags |= RoundingFlag::OverflowedToInf;
    flags |= RoundingFlag::Rounded;
    const float inf = std::numeric_limits<float>::infinity();
    return {FpValue::unchecked(d.negative ? -inf : inf, format), flags};
  }
  if (result_exp < emin && !format.denormals) {
    flags |= RoundingFlag::FlushedDenormal;
    return {FpValue::unchecked(signed_zero(d.negative), format), flags};
  }

  // q <= 2^(p+1) <= 2^24 and quantum_exp >= -149: exact in binary32.
  const float mag = std::ldexp(static_cast<float>(static_cast<std::uint32_t>(q)),
                               quantum_exp);
  if (!inexact) flags |= RoundingFlag::Exact;
  return {FpValue::unchecked(d.negative ? -mag : mag, format), flags};
}

}  // namespace detail

std::string to_string(RoundingFlags flags) {
  static constexpr std::pair<RoundingFlag, std::string_view> kNames[] = {
      {RoundingFlag::Exact, "Exact"},
      {RoundingFlag::Rounded, "Rounded"},
      {RoundingFlag::UnderflowedToZero, "Underflowed_to_zero"},
      {RoundingFlag::OverflowedToInf, "Overflowed_to_inf"},
      {RoundingFlag::FlushedDenormal, "Flushed_denormal"},
  };
  std::string out;
  for (const auto& [flag, name] : kNames) {
    if (!flags.has(flag)) continue;
    if (!out.empty()) out += '|';
    out += name;
  }
  return out.empty() ? "none" : out;
}

RoundingOutcome roundfp(float x, const FpFormat& format) noexcept {
  if (std::isnan(x)) {
    const float nan = canonical_nan();
    const bool same = std::bit_cast<std::uint32_t>(x) ==
                      std::bit_cast<std::uint32_t>(nan);
    return {FpValue::unchecked(nan, format),
            same ? RoundingFlags(RoundingFlag::Exact) : RoundingFlags()};
  }
  if (std::isinf(x)) {
    return {FpValue::unchecked(x, format), RoundingFlag::Exact};
  }
  return detail::round_dyadic(detail::decompose(x), format);
}

float round_value(float x, const FpFormat& format) noexcept {
  return roundfp(x, format).value.value();
}

void roundfp_inplace(std::span<float> values, const FpFormat& format) noexcept {
  for (float& v : values) v = round_value(v, format);
}

QuantTensor roundfp_tensor(const Tensor& x, const FpFormat& format,
                           const TelemetryTag* tag) {
  QuantTensor out{x, format, 0};
  for (float& v : out.tensor.data()) {
    const auto outcome = roundfp(v, format);
    if (outcome.flags.has(RoundingFlag::FlushedDenormal)) ++out.flushed;
    v = outcome.value.value();
  }
  if (tag != nullptr && tag->sink != nullptr) {
    tag->sink->record(DenormalStats{tag->tensor_id, tag->phase, tag->step,
                                    count_classes(out.tensor.data(), format)});
  }
  return out;
}

}  // namespace fpemu
