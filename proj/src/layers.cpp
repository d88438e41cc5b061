// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fpemu/layers.hpp"

#include <cmath>

#include "fpemu/rounding.hpp"

namespace fpemu {

namespace {

Param make_param(std::string name, std::vector<std::size_t> shape) {
  Param p;
  p.name = std::move(name);
  p.value = Tensor(shape);
  p.grad = Tensor(shape);
  p.velocity = Tensor(shape);
  return p;
}

void init_uniform(Tensor& t, std::size_t fan_in, std::mt19937_64& rng) {
  const float bound = std::sqrt(3.0f / static_cast<float>(fan_in));
  for (float& v : t.data()) v = uniform(rng, -bound, bound);
}

// Column sums of a [rows, cols] matrix with binary32 accumulation.
void column_sums(const Tensor& m, Tensor& out) {
  for (std::size_t j = 0; j < m.cols(); ++j) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < m.rows(); ++i) acc = fmacs(acc, m.at(i, j), 1.0f);
    out[j] = acc;
  }
}

// R(prod[i, j] + R(b[j])) in place.
void add_bias(Tensor& prod, const Tensor& bias_q, const QuantSpec& q) {
  const FpFormat fmt = q.compute_format();
  for (std::size_t i = 0; i < prod.rows(); ++i) {
    for (std::size_t j = 0; j < prod.cols(); ++j) {
      prod.at(i, j) = q.quantize(add_round(prod.at(i, j), bias_q[j], fmt));
    }
  }
}

}  // namespace

float uniform(std::mt19937_64& rng, float lo, float hi) {
  const float unit = std::ldexp(static_cast<float>(rng() >> 40), -24);
  return lo + (hi - lo) * unit;
}

void QuantSpec::quantize(Tensor& t) const noexcept {
  if (format) roundfp_inplace(t.data(), *format);
}

float QuantSpec::quantize(float v) const noexcept {
  return format ? round_value(v, *format) : v;
}

void PassContext::observe(const std::string& tensor_id, Phase phase,
                          const Tensor& t) const {
  if (sink == nullptr) return;
  sink->record(DenormalStats{tensor_id, phase, step,
                             count_classes(t.data(), quant->compute_format())});
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, std::size_t in, std::size_t out,
               std::mt19937_64& rng)
    : name_(std::move(name)),
      weight_(make_param(name_ + ".weight", {out, in})),
      bias_(make_param(name_ + ".bias", {out})) {
  init_uniform(weight_.value, in, rng);
}

Tensor Linear::forward(const Tensor& x, const PassContext& ctx) {
  const QuantSpec& q = *ctx.quant;
  x_q_ = x;
  q.quantize(x_q_);
  w_q_ = weight_.value;
  q.quantize(w_q_);
  ctx.observe(name_ + ".weight", Phase::Weight, w_q_);
  Tensor b_q = bias_.value;
  q.quantize(b_q);

  Tensor y = matmul(x_q_, w_q_.transposed(), q.mode, q.compute_format(), q.threads);
  add_bias(y, b_q, q);
  ctx.observe(name_ + ".out", Phase::ForwardActivation, y);
  return y;
}

Tensor Linear::backward(const Tensor& dy, const PassContext& ctx,
                        bool need_input_grad) {
  const QuantSpec& q = *ctx.quant;
  Tensor dy_q = dy;
  q.quantize(dy_q);

  // Weight gradients stay at accumulator width for the master update.
  weight_.grad = matmul_accumulate(dy_q.transposed(), x_q_, q.mode,
                                   q.compute_format(), q.threads);
  column_sums(dy_q, bias_.grad);

  if (!need_input_grad) return {};
  Tensor dx = matmul(dy_q, w_q_, q.mode, q.compute_format(), q.threads);
  ctx.observe(name_ + ".grad", Phase::ActivationGradient, dx);
  return dx;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, std::size_t in_channels,
               std::size_t out_channels, std::size_t kernel,
               std::mt19937_64& rng)
    : name_(std::move(name)),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      weight_(make_param(name_ + ".weight",
                         {out_channels, in_channels * kernel * kernel})),
      bias_(make_param(name_ + ".bias", {out_channels})) {
  init_uniform(weight_.value, in_channels * kernel * kernel, rng);
}

Tensor Conv2d::forward(const Tensor& x, const PassContext& ctx) {
  if (x.rank() != 4 || x.dim(1) != in_channels_ || x.dim(2) < kernel_ ||
      x.dim(3) < kernel_) {
    throw ShapeError(name_ + ": expected [batch, " +
                     std::to_string(in_channels_) + ", h, w] input");
  }
  const QuantSpec& q = *ctx.quant;
  input_shape_ = x.shape();
  const std::size_t batch = x.dim(0);
  const std::size_t h = x.dim(2);
  const std::size_t w = x.dim(3);
  const std::size_t k = kernel_;
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;
  const std::size_t patch = in_channels_ * k * k;

  Tensor x_q = x;
  q.quantize(x_q);
  cols_q_ = Tensor::matrix(batch * oh * ow, patch);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t row = (b * oh + oy) * ow + ox;
        for (std::size_t c = 0; c < in_channels_; ++c) {
          for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
              cols_q_.at(row, (c * k + i) * k + j) =
                  x_q[((b * in_channels_ + c) * h + oy + i) * w + ox + j];
            }
          }
        }
      }
    }
  }

  w_q_ = weight_.value;
  q.quantize(w_q_);
  ctx.observe(name_ + ".weight", Phase::Weight, w_q_);
  Tensor b_q = bias_.value;
  q.quantize(b_q);

  Tensor flat = matmul(cols_q_, w_q_.transposed(), q.mode, q.compute_format(),
                       q.threads);
  add_bias(flat, b_q, q);

  Tensor y({batch, out_channels_, oh, ow});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out_channels_; ++o) {
      for (std::size_t p = 0; p < oh * ow; ++p) {
        y[(b * out_channels_ + o) * oh * ow + p] = flat.at(b * oh * ow + p, o);
      }
    }
  }
  ctx.observe(name_ + ".out", Phase::ForwardActivation, y);
  return y;
}

Tensor Conv2d::backward(const Tensor& dy, const PassContext& ctx,
                        bool need_input_grad) {
  const QuantSpec& q = *ctx.quant;
  const std::size_t batch = input_shape_[0];
  const std::size_t h = input_shape_[2];
  const std::size_t w = input_shape_[3];
  const std::size_t k = kernel_;
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;

  Tensor dy_q = dy;
  q.quantize(dy_q);
  Tensor dy_flat = Tensor::matrix(batch * oh * ow, out_channels_);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out_channels_; ++o) {
      for (std::size_t p = 0; p < oh * ow; ++p) {
        dy_flat.at(b * oh * ow + p, o) = dy_q[(b * out_channels_ + o) * oh * ow + p];
      }
    }
  }

  weight_.grad = matmul_accumulate(dy_flat.transposed(), cols_q_, q.mode,
                                   q.compute_format(), q.threads);
  column_sums(dy_flat, bias_.grad);

  if (!need_input_grad) return {};

  // dx[b, c, y, x] = sum over (o, i, j) of dy[b, o, y-i, x-j] * w[o, c, i, j],
  // one reduction per input element.
  const std::size_t red = out_channels_ * k * k;
  Tensor shifted = Tensor::matrix(batch * h * w, red);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t row = (b * h + y) * w + x;
        for (std::size_t o = 0; o < out_channels_; ++o) {
          for (std::size_t i = 0; i < k; ++i) {
            if (y < i || y - i >= oh) continue;
            for (std::size_t j = 0; j < k; ++j) {
              if (x < j || x - j >= ow) continue;
              shifted.at(row, (o * k + i) * k + j) =
                  dy_q[((b * out_channels_ + o) * oh + y - i) * ow + x - j];
            }
          }
        }
      }
    }
  }
  Tensor w_r = Tensor::matrix(red, in_channels_);
  for (std::size_t o = 0; o < out_channels_; ++o) {
    for (std::size_t c = 0; c < in_channels_; ++c) {
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          w_r.at((o * k + i) * k + j, c) = w_q_.at(o, (c * k + i) * k + j);
        }
      }
    }
  }
  const Tensor dx_flat = matmul(shifted, w_r, q.mode, q.compute_format(), q.threads);
  Tensor dx(input_shape_);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < in_channels_; ++c) {
      for (std::size_t p = 0; p < h * w; ++p) {
        dx[(b * in_channels_ + c) * h * w + p] = dx_flat.at(b * h * w + p, c);
      }
    }
  }
  ctx.observe(name_ + ".grad", Phase::ActivationGradient, dx);
  return dx;
}

// ---------------------------------------------------------------- Relu

Tensor Relu::forward(const Tensor& x, const PassContext& ctx) {
  Tensor y = x;
  ctx.quant->quantize(y);
  mask_ = Tensor(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > 0.0f) {
      mask_[i] = 1.0f;
    } else if (!std::isnan(y[i])) {
      y[i] = 0.0f;
    }
  }
  return y;
}

Tensor Relu::backward(const Tensor& dy, const PassContext& ctx,
                      bool need_input_grad) {
  if (!need_input_grad) return {};
  Tensor dx = dy;
  ctx.quant->quantize(dx);
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (mask_[i] == 0.0f) dx[i] = 0.0f;
  }
  return dx;
}

// ---------------------------------------------------------------- Flatten

Tensor Flatten::forward(const Tensor& x, const PassContext&) {
  input_shape_ = x.shape();
  Tensor y = x;
  y.reshape({x.dim(0), x.size() / x.dim(0)});
  return y;
}

Tensor Flatten::backward(const Tensor& dy, const PassContext&,
                         bool need_input_grad) {
  if (!need_input_grad) return {};
  Tensor dx = dy;
  dx.reshape(input_shape_);
  return dx;
}

// ---------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x, const PassContext& ctx) {
  Tensor h = x;
  for (auto& layer : layers_) h = layer->forward(h, ctx);
  return h;
}

void Sequential::backward(const Tensor& dy, const PassContext& ctx) {
  Tensor g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(g, ctx, i > 0);
  }
}

std::vector<Param*> Sequential::params() {
  std::vector<Param*> out;
  for (auto& layer : layers_) {
    for (Param* p : layer->params()) out.push_back(p);
  }
  return out;
}

std::vector<const Param*> Sequential::params() const {
  std::vector<const Param*> out;
  for (const auto& layer : layers_) {
    for (const Param* p : layer->params()) out.push_back(p);
  }
  return out;
}

}  // namespace fpemu
