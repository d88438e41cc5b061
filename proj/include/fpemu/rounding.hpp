// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef FPEMU_ROUNDING_HPP
#define FPEMU_ROUNDING_HPP

#include <cstdint>
#include <span>
#include <string>

#include "fpemu/format.hpp"
#include "fpemu/telemetry.hpp"
#include "fpemu/tensor.hpp"

namespace fpemu {

enum class RoundingFlag : std::uint8_t {
  Exact = 1u << 0,
  Rounded = 1u << 1,
  UnderflowedToZero = 1u << 2,
  OverflowedToInf = 1u << 3,
  FlushedDenormal = 1u << 4,
};

class RoundingFlags {
 public:
  constexpr RoundingFlags() = default;
  constexpr RoundingFlags(RoundingFlag f) : bits_(static_cast<std::uint8_t>(f)) {}

  [[nodiscard]] constexpr bool has(RoundingFlag f) const noexcept {
    return (bits_ & static_cast<std::uint8_t>(f)) != 0;
  }
  constexpr RoundingFlags& operator|=(RoundingFlags other) noexcept {
    bits_ |= other.bits_;
    return *this;
  }
  friend constexpr RoundingFlags operator|(RoundingFlags a, RoundingFlags b) {
    return a |= b;
  }
  [[nodiscard]] constexpr std::uint8_t bits() const noexcept { return bits_; }

  friend constexpr bool operator==(RoundingFlags, RoundingFlags) = default;

 private:
  std::uint8_t bits_ = 0;
};

constexpr RoundingFlags operator|(RoundingFlag a, RoundingFlag b) {
  return RoundingFlags(a) | RoundingFlags(b);
}

/// "Rounded|Underflowed_to_zero" style listing.
[[nodiscard]] std::string to_string(RoundingFlags flags);

struct RoundingOutcome {
  FpValue value;
  RoundingFlags flags;
};

/// Rounds any binary32 value to the nearest value of `format`, ties to
/// even. Magnitudes at or above (2 - 2^(-p-1)) * 2^emax become +-inf.
/// In flush-to-zero formats a result that would be denormal becomes a
/// zero of the same sign. NaN maps to the canonical NaN.
[[nodiscard]] RoundingOutcome roundfp(float x, const FpFormat& format) noexcept;

/// Value-only shorthand for roundfp(x, format).value.value().
[[nodiscard]] float round_value(float x, const FpFormat& format) noexcept;

/// Element-wise roundfp of a tensor.
struct QuantTensor {
  Tensor tensor;
  FpFormat format;
  /// Elements that became zero because of flush-to-zero.
  std::int64_t flushed = 0;
};

/// Rounds every element; if `tag` has a sink, records a DenormalStats
/// for the rounded tensor.
[[nodiscard]] QuantTensor roundfp_tensor(const Tensor& x, const FpFormat& format,
                                         const TelemetryTag* tag = nullptr);

/// In-place variant used by the training hot path.
void roundfp_inplace(std::span<float> values, const FpFormat& format) noexcept;

namespace detail {

using u128 = unsigned __int128;

/// An exact finite value (-1)^negative * (mag + sticky*eps) * 2^exp with
/// 0 < eps < 1. When `sticky` is set the caller guarantees that one unit
/// 2^exp is at most a quarter of the target quantum, so the sticky bit
/// can only break ties and never move a result across a midpoint.
struct Dyadic {
  bool negative = false;
  u128 mag = 0;
  int exp = 0;
  bool sticky = false;
};

/// Splits a finite float into an exact Dyadic with a 24-bit significand.
[[nodiscard]] Dyadic decompose(float finite) noexcept;

/// Single correct rounding of an exact value into `format`.
[[nodiscard]] RoundingOutcome round_dyadic(const Dyadic& d,
                                           const FpFormat& format) noexcept;

}  // namespace detail

}  // namespace fpemu

#endif  // FPEMU_ROUNDING_HPP
