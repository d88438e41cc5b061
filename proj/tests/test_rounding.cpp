// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "fpemu/reference.hpp"
#include "fpemu/rounding.hpp"
#include "support.hpp"

namespace fpemu {
namespace {

using testing::bits;
using testing::p2;

TEST(Roundfp, ZeroIsExact) {
  for (const auto& f : testing::sixteen_bit_formats()) {
    const auto r = roundfp(0.0f, f);
    EXPECT_EQ(bits(r.value.value()), bits(0.0f));
    EXPECT_EQ(r.flags, RoundingFlags(RoundingFlag::Exact));
    EXPECT_EQ(bits(roundfp(-0.0f, f).value.value()), bits(-0.0f));
  }
}

TEST(Roundfp, TieBelowMinDenormalGoesToZero) {
  const auto r = roundfp(p2(-25), formats::kHalf);
  EXPECT_EQ(r.value.value(), 0.0f);
  EXPECT_EQ(r.flags, RoundingFlag::Rounded | RoundingFlag::UnderflowedToZero);
  EXPECT_EQ(to_string(r.flags), "Rounded|Underflowed_to_zero");
  // Just above the tie rounds up to the smallest denormal.
  EXPECT_EQ(round_value(std::nextafter(p2(-25), 1.0f), formats::kHalf), p2(-24));
  EXPECT_EQ(bits(round_value(-p2(-25), formats::kHalf)), bits(-0.0f));
}

TEST(Roundfp, FlushesDenormalsInFtzFormats) {
  const auto r = roundfp(p2(-15), formats::kHalfFtz);
  EXPECT_EQ(r.value.value(), 0.0f);
  EXPECT_EQ(r.flags, RoundingFlags(RoundingFlag::FlushedDenormal));
  EXPECT_EQ(round_value(p2(-35), formats::kE6M9Ftz), 0.0f);
  EXPECT_TRUE(roundfp(p2(-35), formats::kE6M9Ftz).flags.has(RoundingFlag::FlushedDenormal));
  EXPECT_EQ(bits(round_value(-p2(-15), formats::kHalfFtz)), bits(-0.0f));
}

TEST(Roundfp, FlushHappensAfterRounding) {
  // Just below 2^-14 rounds up to the normal 2^-14 and is kept.
  const float below = std::nextafter(p2(-14), 0.0f);
  EXPECT_EQ(round_value(below, formats::kHalfFtz), p2(-14));
}

TEST(Roundfp, MidpointTiesToEven) {
  const auto r = roundfp(1.0f + p2(-10), formats::kE6M9);
  EXPECT_EQ(r.value.value(), 1.0f);
  EXPECT_EQ(r.flags, RoundingFlags(RoundingFlag::Rounded));
  // Odd neighbour below: the tie goes up.
  EXPECT_EQ(round_value(1.0f + p2(-9) + p2(-10), formats::kE6M9), 1.0f + p2(-8));
}

TEST(Roundfp, OverflowGoesToInfinity) {
  const auto r = roundfp(65520.0f, formats::kHalf);  // tie between 65504 and 2^16
  EXPECT_EQ(r.value.value(), INFINITY);
  EXPECT_EQ(r.flags, RoundingFlag::Rounded | RoundingFlag::OverflowedToInf);
  EXPECT_EQ(round_value(std::nextafter(65520.0f, 0.0f), formats::kHalf), 65504.0f);
  EXPECT_EQ(round_value(-1e10f, formats::kHalf), -INFINITY);
}

TEST(Roundfp, SpecialValuesPassThrough) {
  EXPECT_EQ(round_value(INFINITY, formats::kHalf), INFINITY);
  EXPECT_EQ(roundfp(-INFINITY, formats::kHalf).flags, RoundingFlags(RoundingFlag::Exact));
  const auto r = roundfp(std::bit_cast<float>(0xFFC00123u), formats::kHalf);
  EXPECT_EQ(bits(r.value.value()), bits(canonical_nan()));
}

TEST(Roundfp, IdentityWidthIsIdentity) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100000; ++i) {
    const float x = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
    if (std::isnan(x)) continue;
    ASSERT_EQ(bits(round_value(x, formats::kBinary32)), bits(x));
  }
}

TEST(Roundfp, AgreesWithExactOracle) {
  std::mt19937_64 rng(5);
  for (const auto& f : testing::sixteen_bit_formats()) {
    for (int i = 0; i < 50000; ++i) {
      const float x = testing::interesting_float(rng, f);
      ASSERT_EQ(bits(round_value(x, f)), bits(reference::roundfp(x, f)))
          << f.to_string() << " x=" << hex_float(x);
    }
  }
}

TEST(Roundfp, OddWidthsAgreeWithOracle) {
  std::mt19937_64 rng(6);
  for (int e = 2; e <= 8; ++e) {
    for (int p : {1, 2, 3, 7, 12, 22}) {
      for (bool d : {true, false}) {
        const auto f = FpFormat::make(e, p, d);
        for (int i = 0; i < 2000; ++i) {
          const float x = testing::interesting_float(rng, f);
          ASSERT_EQ(bits(round_value(x, f)), bits(reference::roundfp(x, f)))
              << f.to_string() << " x=" << hex_float(x);
        }
      }
    }
  }
}

TEST(RoundfpTensor, Examples) {
  RunLog log;
  const TelemetryTag tag{&log, "t", Phase::ForwardActivation, 0};
  const Tensor a({2}, {p2(-24), 1.0f});
  const QuantTensor qa = roundfp_tensor(a, formats::kHalf, &tag);
  EXPECT_TRUE(bit_identical(qa.tensor, a));
  const auto s = log.summarize();
  ASSERT_EQ(s.records.size(), 1u);
  EXPECT_DOUBLE_EQ(s.records[0].fraction_denormal(), 0.5);

  const QuantTensor qb = roundfp_tensor(Tensor({2}, {p2(-25), p2(-25)}), formats::kHalf);
  EXPECT_EQ(qb.tensor[0], 0.0f);
  EXPECT_EQ(qb.tensor[1], 0.0f);
  const auto counts = count_classes(qb.tensor.data(), formats::kHalf);
  EXPECT_EQ(counts[FpClass::Denormal], 0);

  const QuantTensor qc = roundfp_tensor(Tensor({3}, {p2(-15), 1.0f, -p2(-20)}), formats::kHalfFtz);
  EXPECT_EQ(qc.flushed, 2);
  const Tensor zeros({2}, 0.0f);
  EXPECT_TRUE(bit_identical(roundfp_tensor(zeros, formats::kHalf).tensor, zeros));
}

// Rounding invariants, property-style.

class RoundingProperty : public ::testing::TestWithParam<FpFormat> {};

TEST_P(RoundingProperty, Idempotent) {
  const FpFormat f = GetParam();
  std::mt19937_64 rng(21);
  for (int i = 0; i < 20000; ++i) {
    const float x = testing::interesting_float(rng, f);
    const float once = round_value(x, f);
    ASSERT_EQ(bits(round_value(once, f)), bits(once)) << hex_float(x);
  }
}

TEST_P(RoundingProperty, Monotone) {
  const FpFormat f = GetParam();
  std::mt19937_64 rng(22);
  for (int i = 0; i < 20000; ++i) {
    float a = testing::interesting_float(rng, f);
    float b = testing::interesting_float(rng, f);
    if (std::isnan(a) || std::isnan(b)) continue;
    if (a > b) std::swap(a, b);
    ASSERT_LE(round_value(a, f), round_value(b, f)) << hex_float(a) << " " << hex_float(b);
  }
}

TEST_P(RoundingProperty, SignSymmetric) {
  const FpFormat f = GetParam();
  std::mt19937_64 rng(23);
  for (int i = 0; i < 20000; ++i) {
    const float x = testing::interesting_float(rng, f);
    if (std::isnan(x)) continue;
    ASSERT_EQ(bits(round_value(-x, f)), bits(-round_value(x, f))) << hex_float(x);
  }
}

TEST_P(RoundingProperty, WithinHalfUlp) {
  const FpFormat f = GetParam();
  const auto c = format_constants(f);
  std::mt19937_64 rng(24);
  for (int i = 0; i < 20000; ++i) {
    const float x = testing::interesting_float(rng, f);
    const float r = round_value(x, f);
    if (!std::isfinite(x) || !std::isfinite(r)) continue;
    const int e = std::max(std::ilogb(x == 0.0f ? 1.0f : x), c.emin);
    const double half_ulp = std::ldexp(1.0, e - f.mant_bits - 1);
    const double err = std::fabs(static_cast<double>(r) - static_cast<double>(x));
    if (!f.denormals && std::fabs(x) < c.min_normal && r == 0.0f) continue;  // flushed
    ASSERT_LE(err, half_ulp) << hex_float(x);
  }
}

INSTANTIATE_TEST_SUITE_P(Formats, RoundingProperty,
                         ::testing::ValuesIn(testing::sixteen_bit_formats()),
                         [](const auto& info) {
                           std::string s = info.param.to_string();
                           for (char& ch : s) {
                             if (ch == '/') ch = '_';
                           }
                           return "F" + s;
                         });

}  // namespace
}  // namespace fpemu
