// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef FPEMU_LOSS_SCALER_HPP
#define FPEMU_LOSS_SCALER_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "fpemu/layers.hpp"

namespace fpemu {

struct LossScalerConfig {
  int init_scale_log2 = 15;
  std::int64_t growth_interval = 200;
  int min_scale_log2 = 0;
  int max_scale_log2 = 24;
};

/// Dynamic loss scaling. The scale is always 2^k so scaling and
/// unscaling never round (absent overflow/underflow of binary32).
/// Overflow or NaN in the gradients halves the scale and skips the step;
/// `growth_interval` consecutive clean steps double it.
class LossScaler {
 public:
  explicit LossScaler(LossScalerConfig config = {});

  [[nodiscard]] float scale() const noexcept;
  [[nodiscard]] int scale_log2() const noexcept { return scale_log2_; }
  [[nodiscard]] std::int64_t good_steps() const noexcept { return good_steps_; }
  [[nodiscard]] const LossScalerConfig& config() const noexcept { return config_; }

  enum class Decision { Proceed, SkipStep };

  /// Inspects scaled gradients. On Proceed they are unscaled in place
  /// (multiplied by 2^-k); on SkipStep they are left untouched.
  Decision step(std::span<Param* const> params);

  /// Same policy over raw gradient buffers.
  Decision step(std::span<const std::span<float>> grads);

 private:
  void unscale(std::span<float> g) const noexcept;

  LossScalerConfig config_;
  int scale_log2_;
  std::int64_t good_steps_ = 0;
};

[[nodiscard]] bool all_finite(std::span<const float> values) noexcept;

}  // namespace fpemu

#endif  // FPEMU_LOSS_SCALER_HPP
