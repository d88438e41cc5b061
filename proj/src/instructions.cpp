// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fpemu/instructions.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <limits>
#include <thread>
#include <vector>

namespace fpemu {

namespace {

using detail::Dyadic;
using detail::u128;

int bit_width(u128 v) noexcept {
  const auto hi = static_cast<std::uint64_t>(v >> 64);
  if (hi != 0) return 64 + std::bit_width(hi);
  return std::bit_width(static_cast<std::uint64_t>(v));
}

int msb_exp(const Dyadic& d) noexcept { return d.exp + bit_width(d.mag) - 1; }

// Below this msb distance the sum is formed exactly in 128 bits; above
// it the smaller term only contributes a sticky bit.
constexpr int kStickyDistance = 63;
constexpr int kStickyUnitOffset = 62;

// Exact a + b for nonzero finite Dyadics whose magnitudes have at most
// 48 significant bits.
Dyadic exact_sum(const Dyadic& a, const Dyadic& b) noexcept {
  const bool a_larger = msb_exp(a) >= msb_exp(b);
  const Dyadic& large = a_larger ? a : b;
  const Dyadic& small = a_larger ? b : a;
  const int large_msb = msb_exp(large);

  if (large_msb - msb_exp(small) >= kStickyDistance) {
    // |small| < 2^(large_msb - 62), one unit of the widened large term.
    const int new_exp = large_msb - kStickyUnitOffset;
    Dyadic out{large.negative, large.mag << (large.exp - new_exp), new_exp,
               true};
    if (large.negative != small.negative) out.mag -= 1;
    return out;
  }

  const int base = std::min(a.exp, b.exp);
  const u128 ma = a.mag << (a.exp - base);
  const u128 mb = b.mag << (b.exp - base);
  if (a.negative == b.negative) return {a.negative, ma + mb, base, false};
  if (ma == mb) return {false, 0, base, false};
  if (ma > mb) return {a.negative, ma - mb, base, false};
  return {b.negative, mb - ma, base, false};
}

}  // namespace

float fused_multiply_add(float a, float x, float y,
                         const FpFormat& format) noexcept {
  if (std::isnan(a) || std::isnan(x) || std::isnan(y)) return canonical_nan();
  const bool product_negative = std::signbit(x) != std::signbit(y);
  if (std::isinf(x) || std::isinf(y)) {
    if (x == 0.0f || y == 0.0f) return canonical_nan();
    if (std::isinf(a) && std::signbit(a) != product_negative) {
      return canonical_nan();
    }
    const float inf = std::numeric_limits<float>::infinity();
    return product_negative ? -inf : inf;
  }
  if (std::isinf(a)) return a;

  const Dyadic dx = detail::decompose(x);
  const Dyadic dy = detail::decompose(y);
  const Dyadic product{product_negative, dx.mag * dy.mag, dx.exp + dy.exp,
                       false};
  const Dyadic addend = detail::decompose(a);

  if (product.mag == 0) {
    if (a != 0.0f) return detail::round_dyadic(addend, format).value.value();
    // Exact zero sum: -0 only when both terms are -0.
    const bool negative = addend.negative && product.negative;
    return negative ? -0.0f : 0.0f;
  }
  if (addend.mag == 0) {
    return detail::round_dyadic(product, format).value.value();
  }
  return detail::round_dyadic(exact_sum(addend, product), format)
      .value.value();
}

float multiply_round(float x, float y, const FpFormat& format) noexcept {
  if (std::isnan(x) || std::isnan(y)) return canonical_nan();
  if (std::isinf(x) || std::isinf(y)) {
    if (x == 0.0f || y == 0.0f) return canonical_nan();
    const float inf = std::numeric_limits<float>::infinity();
    return std::signbit(x) != std::signbit(y) ? -inf : inf;
  }
  const Dyadic dx = detail::decompose(x);
  const Dyadic dy = detail::decompose(y);
  return detail::round_dyadic(
             Dyadic{dx.negative != dy.negative, dx.mag * dy.mag,
                    dx.exp + dy.exp, false},
             format)
      .value.value();
}

float add_round(float a, float b, const FpFormat& format) noexcept {
  return fused_multiply_add(a, b, 1.0f, format);
}

float mac(float a, float x, float y, const FpFormat& format) noexcept {
  return add_round(a, multiply_round(x, y, format), format);
}

float macs(float a, float x, float y, const FpFormat& format) noexcept {
  return add_round(a, multiply_round(x, y, format), formats::kBinary32);
}

float fmac(float a, float x, float y, const FpFormat& format) noexcept {
  return fused_multiply_add(a, x, y, format);
}

float fmacs(float a, float x, float y) noexcept {
  return fused_multiply_add(a, x, y, formats::kBinary32);
}

AccumMode AccumMode::parse(std::string_view text) {
  if (text == "mac") return {AccumKind::Mac, 8};
  if (text == "macs") return {AccumKind::Macs, 8};
  if (text == "fmac") return {AccumKind::Fmac, 8};
  if (text == "fmacs") return {AccumKind::Fmacs, 8};
  if (text.starts_with("fmac")) {
    const auto digits = text.substr(4);
    int chunk = 0;
    const auto* end = digits.data() + digits.size();
    auto [ptr, ec] = std::from_chars(digits.data(), end, chunk);
    if (!digits.empty() && ec == std::errc{} && ptr == end && chunk >= 1) {
      return {AccumKind::Fmac8, chunk};
    }
  }
  throw std::invalid_argument("unknown accumulate mode '" + std::string(text) +
                              "': expected mac|macs|fmac|fmacs|fmac8");
}

std::string AccumMode::to_string() const {
  switch (kind) {
    case AccumKind::Mac: return "mac";
    case AccumKind::Macs: return "macs";
    case AccumKind::Fmac: return "fmac";
    case AccumKind::Fmacs: return "fmacs";
    case AccumKind::Fmac8: return "fmac" + std::to_string(chunk);
  }
  return "?";
}

float fmac8_accumulate(std::span<const float> w, std::span<const float> x,
                       const FpFormat& format, int chunk) {
  if (w.size() != x.size()) throw ShapeError("dot: length mismatch");
  if (chunk < 1) throw std::invalid_argument("fmac8: chunk must be >= 1");
  const auto step = static_cast<std::size_t>(chunk);
  float master = 0.0f;
  float acc = 0.0f;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i % step == 0) {
      master = add_round(master, acc, formats::kBinary32);
      acc = 0.0f;
    }
    acc = fmac(acc, w[i], x[i], format);
  }
  return add_round(master, acc, formats::kBinary32);
}

float fmac8_dot(std::span<const float> w, std::span<const float> x,
                const FpFormat& format, int chunk) {
  return round_value(fmac8_accumulate(w, x, format, chunk), format);
}

float dot_accumulate(std::span<const float> w, std::span<const float> x,
                     AccumMode mode, const FpFormat& format) {
  if (w.size() != x.size()) throw ShapeError("dot: length mismatch");
  float acc = 0.0f;
  switch (mode.kind) {
    case AccumKind::Mac:
      for (std::size_t i = 0; i < w.size(); ++i) acc = mac(acc, w[i], x[i], format);
      return acc;
    case AccumKind::Macs:
      for (std::size_t i = 0; i < w.size(); ++i) acc = macs(acc, w[i], x[i], format);
      return acc;
    case AccumKind::Fmac:
      for (std::size_t i = 0; i < w.size(); ++i) acc = fmac(acc, w[i], x[i], format);
      return acc;
    case AccumKind::Fmacs:
      for (std::size_t i = 0; i < w.size(); ++i) acc = fmacs(acc, w[i], x[i]);
      return acc;
    case AccumKind::Fmac8:
      return fmac8_accumulate(w, x, format, mode.chunk);
  }
  return acc;
}

float dot(std::span<const float> w, std::span<const float> x, AccumMode mode,
          const FpFormat& format) {
  return round_value(dot_accumulate(w, x, mode, format), format);
}

namespace {

Tensor matmul_impl(const Tensor& a, const Tensor& b, AccumMode mode,
                   const FpFormat& format, unsigned threads, bool round_out) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: rank must be 2");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) +
                     " and " + std::to_string(b.rows()) + " differ");
  }
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  const std::size_t n = b.cols();
  const Tensor bt = b.transposed();
  Tensor c = Tensor::matrix(m, n);

  auto run_rows = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = a.data().subspan(i * k, k);
      for (std::size_t j = 0; j < n; ++j) {
        const auto col = bt.data().subspan(j * k, k);
        const float acc = dot_accumulate(row, col, mode, format);
        c.at(i, j) = round_out ? round_value(acc, format) : acc;
      }
    }
  };

  const std::size_t workers =
      std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(m, 1));
  if (workers <= 1) {
    run_rows(0, m);
    return c;
  }
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t per = (m + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * per;
      const std::size_t end = std::min(m, begin + per);
      if (begin >= end) break;
      pool.emplace_back(run_rows, begin, end);
    }
  }
  return c;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, AccumMode mode,
              const FpFormat& format, unsigned threads) {
  return matmul_impl(a, b, mode, format, threads, true);
}

Tensor matmul_accumulate(const Tensor& a, const Tensor& b, AccumMode mode,
                         const FpFormat& format, unsigned threads) {
  return matmul_impl(a, b, mode, format, threads, false);
}

}  // namespace fpemu
