// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef FPEMU_FORMAT_HPP
#define FPEMU_FORMAT_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fpemu {

/// Thrown when a format descriptor or a format spec string is invalid.
class FormatError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A parametric binary floating-point format `1/e/p/d`.
///
/// One sign bit, `exp_bits` exponent bits with IEEE-style bias
/// 2^(e-1)-1 (all-ones exponent reserved for inf/NaN), `mant_bits`
/// stored mantissa bits plus a hidden bit, and denormals either
/// supported (`d`) or flushed to zero (`n`).
///
/// Every format with e <= 8 and p <= 23 is a subset of binary32, so
/// values are carried as `float` surrogates throughout the library.
struct FpFormat {
  int exp_bits = 5;
  int mant_bits = 10;
  bool denormals = true;

  static constexpr int kMinExpBits = 2;
  static constexpr int kMaxExpBits = 8;
  static constexpr int kMinMantBits = 1;
  static constexpr int kMaxMantBits = 23;

  /// Validating constructor; throws FormatError outside e in [2, 8],
  /// p in [1, 23].
  static FpFormat make(int exp_bits, int mant_bits, bool denormals);

  /// Parses "1/e/p/d" or "1/e/p/n".
  static FpFormat parse(std::string_view spec);

  [[nodiscard]] std::string to_string() const;

  [[nodiscard]] constexpr int total_bits() const noexcept {
    return 1 + exp_bits + mant_bits;
  }
  [[nodiscard]] constexpr int bias() const noexcept {
    return (1 << (exp_bits - 1)) - 1;
  }
  [[nodiscard]] constexpr int emin() const noexcept {
    return -((1 << (exp_bits - 1)) - 2);
  }
  [[nodiscard]] constexpr int emax() const noexcept {
    return (1 << (exp_bits - 1)) - 1;
  }

  friend constexpr bool operator==(const FpFormat&,
                                   const FpFormat&) noexcept = default;
};

namespace formats {
inline constexpr FpFormat kHalf{5, 10, true};        // 1/5/10/d
inline constexpr FpFormat kHalfFtz{5, 10, false};    // 1/5/10/n
inline constexpr FpFormat kE6M9{6, 9, true};         // 1/6/9/d
inline constexpr FpFormat kE6M9Ftz{6, 9, false};     // 1/6/9/n
inline constexpr FpFormat kBfloat16{8, 7, false};    // 1/8/7/n
inline constexpr FpFormat kBinary32{8, 23, true};    // 1/8/23/d
}  // namespace formats

/// Exact derived constants of a format. Powers of two are given both as
/// an exponent and as the (exactly representable) float value.
struct FormatConstants {
  int emin = 0;
  int emax = 0;
  /// Exponent k with min positive denormal 2^k; absent when denormals
  /// are flushed.
  std::optional<int> min_denormal_exp;
  std::optional<float> min_denormal;
  int min_normal_exp = 0;
  float min_normal = 0.0f;
  /// (2 - 2^-p) * 2^emax
  float max_finite = 0.0f;
};

[[nodiscard]] FormatConstants format_constants(const FpFormat& format);

enum class FpClass : std::uint8_t { Zero, Denormal, Normal, Infinity, NaN };

inline constexpr int kFpClassCount = 5;

[[nodiscard]] std::string_view to_string(FpClass c) noexcept;

/// A value known to be exactly representable in `format`. Construct
/// through `FpValue::make` (checks) or from rounding results.
class FpValue {
 public:
  FpValue() = default;

  /// Throws FormatError if `surrogate` is not exactly representable.
  static FpValue make(float surrogate, const FpFormat& format);

  /// Skips the representability check; caller guarantees it.
  static FpValue unchecked(float surrogate, const FpFormat& format) noexcept {
    return FpValue(surrogate, format);
  }

  [[nodiscard]] float value() const noexcept { return surrogate_; }
  [[nodiscard]] const FpFormat& format() const noexcept { return format_; }

 private:
  FpValue(float surrogate, const FpFormat& format) noexcept
      : surrogate_(surrogate), format_(format) {}

  float surrogate_ = 0.0f;
  FpFormat format_{};
};

/// Classifies a float surrogate against `format`. The value is assumed
/// representable; denormal means 0 < |v| < 2^emin.
[[nodiscard]] FpClass classify(float v, const FpFormat& format) noexcept;
[[nodiscard]] inline FpClass classify(const FpValue& v) noexcept {
  return classify(v.value(), v.format());
}

/// True if `v` is exactly a member of the format's value set (NaN counts).
[[nodiscard]] bool is_representable(float v, const FpFormat& format) noexcept;

/// Canonical quiet NaN surrogate (binary32 0x7FC00000).
[[nodiscard]] float canonical_nan() noexcept;

/// Packs a representable value into the 16-bit wire layout
/// sign | biased exponent | mantissa. Requires total_bits() == 16.
/// Throws FormatError for non-16-bit formats or unrepresentable values.
[[nodiscard]] std::uint16_t encode16(float v, const FpFormat& format);
[[nodiscard]] inline std::uint16_t encode16(const FpValue& v) {
  return encode16(v.value(), v.format());
}

/// Inverse of encode16. Total: NaN encodings decode to the canonical NaN,
/// and in flush-to-zero formats denormal encodings decode to signed zero.
[[nodiscard]] FpValue decode16(std::uint16_t word, const FpFormat& format);

/// Parses a binary32 value from "2^k", "-2^k", a hex-float ("0x1p-25"),
/// a decimal (rounded to nearest binary32), "inf" or "nan".
/// Throws std::invalid_argument on malformed text.
[[nodiscard]] float parse_value(std::string_view text);

/// "%a" rendering, exact for every binary32 value.
[[nodiscard]] std::string hex_float(float v);

}  // namespace fpemu

#endif  // FPEMU_FORMAT_HPP
