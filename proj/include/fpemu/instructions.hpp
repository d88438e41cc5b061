// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef FPEMU_INSTRUCTIONS_HPP
#define FPEMU_INSTRUCTIONS_HPP

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "fpemu/format.hpp"
#include "fpemu/rounding.hpp"
#include "fpemu/tensor.hpp"

namespace fpemu {

// Mixed-precision multiply-accumulate instructions. Operands named x, y
// are 16-bit values (representable in `format`); an accumulator is either
// 16-bit (MAC, FMAC) or binary32 (MACS, FMACS).
//
//   MAC    a16 = R16(a16 + R16(x * y))
//   MACS   a32 = R32(a32 + R16(x * y))
//   FMAC   a16 = R16(a16 + x * y)
//   FMACS  a32 = R32(a32 + x * y)
//
// Every R is a single round-to-nearest-even of the exact value.

[[nodiscard]] float mac(float a, float x, float y, const FpFormat& format) noexcept;
[[nodiscard]] float macs(float a, float x, float y, const FpFormat& format) noexcept;
[[nodiscard]] float fmac(float a, float x, float y, const FpFormat& format) noexcept;
[[nodiscard]] float fmacs(float a, float x, float y) noexcept;

/// R_format(a + x * y) with one rounding; the building block of all four.
[[nodiscard]] float fused_multiply_add(float a, float x, float y,
                                       const FpFormat& format) noexcept;
/// R_format(x * y).
[[nodiscard]] float multiply_round(float x, float y,
                                   const FpFormat& format) noexcept;
/// R_format(a + b).
[[nodiscard]] float add_round(float a, float b, const FpFormat& format) noexcept;

enum class AccumKind { Mac, Macs, Fmac, Fmacs, Fmac8 };

/// Reduction strategy for dot products and matrix multiplies.
struct AccumMode {
  AccumKind kind = AccumKind::Fmacs;
  /// FMAC steps per drain into the binary32 master accumulator (FMAC8 only).
  int chunk = 8;

  /// "mac", "macs", "fmac", "fmacs", "fmac8" (or "fmacN" for chunk N).
  static AccumMode parse(std::string_view text);
  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const AccumMode&, const AccumMode&) = default;
};

/// Chunked dot product: `chunk` consecutive FMACs into a 16-bit
/// accumulator, drained into a binary32 master before every chunk and
/// once at the end. Returns the binary32 master, not yet rounded.
[[nodiscard]] float fmac8_accumulate(std::span<const float> w,
                                     std::span<const float> x,
                                     const FpFormat& format, int chunk = 8);

/// fmac8_accumulate followed by roundfp into `format`. Empty input gives +0.
[[nodiscard]] float fmac8_dot(std::span<const float> w, std::span<const float> x,
                              const FpFormat& format, int chunk = 8);

/// Ascending-index reduction of w . x under `mode`. The result is the
/// accumulator: binary32 for MACS/FMACS/FMAC8, `format` for MAC/FMAC.
[[nodiscard]] float dot_accumulate(std::span<const float> w,
                                   std::span<const float> x, AccumMode mode,
                                   const FpFormat& format);

/// dot_accumulate followed by roundfp into `format`.
[[nodiscard]] float dot(std::span<const float> w, std::span<const float> x,
                        AccumMode mode, const FpFormat& format);

/// C = A * B, each output element reduced by `dot` (rounded into
/// `format`). Inputs are expected to be representable in `format`.
/// Parallelism is over output rows only; results do not depend on
/// `threads`. Throws ShapeError on inner-dimension mismatch.
[[nodiscard]] Tensor matmul(const Tensor& a, const Tensor& b, AccumMode mode,
                            const FpFormat& format, unsigned threads = 1);

/// Like matmul but keeps each output at accumulator width (no final
/// rounding into `format`).
[[nodiscard]] Tensor matmul_accumulate(const Tensor& a, const Tensor& b,
                                       AccumMode mode, const FpFormat& format,
                                       unsigned threads = 1);

}  // namespace fpemu

#endif  // FPEMU_INSTRUCTIONS_HPP
