// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef FPEMU_REFERENCE_HPP
#define FPEMU_REFERENCE_HPP

// Slow exact-arithmetic oracles. Every value is held as a big integer
// scaled by 2^kFracBits, so sums and products of binary32 values are exact
// and rounding is decided by comparing against the two neighbouring
// representable values directly. Shares no arithmetic with the fast path.

#include <span>

#include <boost/multiprecision/cpp_int.hpp>

#include "fpemu/format.hpp"

namespace fpemu::reference {

using BigInt = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<
    704, 704, boost::multiprecision::signed_magnitude,
    boost::multiprecision::unchecked, void>>;

/// 2^-kFracBits is finer than the product of two minimum binary32 denormals.
inline constexpr int kFracBits = 320;

/// Exact scaled integer of a finite float: v * 2^kFracBits.
[[nodiscard]] BigInt to_scaled(float finite);

/// Rounds an exact scaled value into `format` (ties to even, overflow to
/// inf, flush-to-zero after rounding). `negative` gives the sign used
/// when the value is zero or rounds to zero.
[[nodiscard]] float round_scaled(const BigInt& scaled, bool negative,
                                 const FpFormat& format);

/// roundfp oracle with NaN/inf handling.
[[nodiscard]] float roundfp(float x, const FpFormat& format);

/// R_format(a + x * y), exact intermediate.
[[nodiscard]] float fused_multiply_add(float a, float x, float y,
                                       const FpFormat& format);

/// Step-by-step chunked FMAC dot product with the drain-before-chunk
/// schedule; returns the final rounding into `format`.
[[nodiscard]] float fmac8_dot(std::span<const float> w, std::span<const float> x,
                              const FpFormat& format, int chunk = 8);

/// Fused binary32 accumulation followed by one rounding into `format`.
[[nodiscard]] float fmacs_dot(std::span<const float> w, std::span<const float> x,
                              const FpFormat& format);

}  // namespace fpemu::reference

#endif  // FPEMU_REFERENCE_HPP
