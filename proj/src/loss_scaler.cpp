// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fpemu/loss_scaler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fpemu {

bool all_finite(std::span<const float> values) noexcept {
  return std::all_of(values.begin(), values.end(),
                     [](float v) { return std::isfinite(v); });
}

LossScaler::LossScaler(LossScalerConfig config)
    : config_(config), scale_log2_(config.init_scale_log2) {
  if (config_.min_scale_log2 > config_.max_scale_log2 ||
      config_.init_scale_log2 < config_.min_scale_log2 ||
      config_.init_scale_log2 > config_.max_scale_log2) {
    throw std::invalid_argument("loss scaler: need min <= init <= max scale");
  }
  if (config_.min_scale_log2 < -126 || config_.max_scale_log2 > 127) {
    throw std::invalid_argument("loss scaler: scale must be a binary32 power of two");
  }
  if (config_.growth_interval < 1) {
    throw std::invalid_argument("loss scaler: growth interval must be >= 1");
  }
}

float LossScaler::scale() const noexcept { return std::ldexp(1.0f, scale_log2_); }

void LossScaler::unscale(std::span<float> g) const noexcept {
  for (float& v : g) v = std::ldexp(v, -scale_log2_);
}

LossScaler::Decision LossScaler::step(std::span<const std::span<float>> grads) {
  const bool clean = std::all_of(grads.begin(), grads.end(),
                                 [](std::span<float> g) { return all_finite(g); });
  if (!clean) {
    scale_log2_ = std::max(scale_log2_ - 1, config_.min_scale_log2);
    good_steps_ = 0;
    return Decision::SkipStep;
  }
  for (auto g : grads) unscale(g);
  if (++good_steps_ >= config_.growth_interval) {
    scale_log2_ = std::min(scale_log2_ + 1, config_.max_scale_log2);
    good_steps_ = 0;
  }
  return Decision::Proceed;
}

LossScaler::Decision LossScaler::step(std::span<Param* const> params) {
  std::vector<std::span<float>> grads;
  grads.reserve(params.size());
  for (Param* p : params) grads.push_back(p->grad.data());
  return step(grads);
}

}  // namespace fpemu
