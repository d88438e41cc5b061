// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef FPEMU_LAYERS_HPP
#define FPEMU_LAYERS_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fpemu/format.hpp"
#include "fpemu/instructions.hpp"
#include "fpemu/telemetry.hpp"
#include "fpemu/tensor.hpp"

namespace fpemu {

/// Numerics of a quantized model: the activation/gradient format (absent
/// means no rounding at layer boundaries) and the matmul reduction.
struct QuantSpec {
  std::optional<FpFormat> format;
  AccumMode mode;
  unsigned threads = 1;

  /// Rounds into the activation format; identity when disabled.
  void quantize(Tensor& t) const noexcept;
  [[nodiscard]] float quantize(float v) const noexcept;
  /// Format used inside the reduction; binary32 when disabled.
  [[nodiscard]] FpFormat compute_format() const noexcept {
    return format.value_or(formats::kBinary32);
  }
};

/// Per-pass state threaded through the layers.
struct PassContext {
  const QuantSpec* quant = nullptr;
  /// Null disables telemetry for this pass.
  TelemetrySink* sink = nullptr;
  std::int64_t step = 0;

  void observe(const std::string& tensor_id, Phase phase,
               const Tensor& t) const;
};

/// A trainable tensor: binary32 master value, its gradient and the
/// optimizer's momentum buffer.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor velocity;
};

class Layer {
 public:
  virtual ~Layer() = default;
  /// `x` is batch-major. Caches what backward needs.
  virtual Tensor forward(const Tensor& x, const PassContext& ctx) = 0;
  /// Returns dL/dx (empty if `need_input_grad` is false) and stores
  /// parameter gradients.
  virtual Tensor backward(const Tensor& dy, const PassContext& ctx,
                          bool need_input_grad) = 0;
  virtual std::vector<Param*> params() { return {}; }
  [[nodiscard]] virtual const std::string& name() const = 0;
};

/// Fully connected layer computing
///   Y = R(R(R(X) . R(W)^T) + R(B))
/// with W stored [out, in] and the product reduced per QuantSpec::mode.
class Linear final : public Layer {
 public:
  Linear(std::string name, std::size_t in, std::size_t out, std::mt19937_64& rng);

  Tensor forward(const Tensor& x, const PassContext& ctx) override;
  Tensor backward(const Tensor& dy, const PassContext& ctx,
                  bool need_input_grad) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  [[nodiscard]] const std::string& name() const override { return name_; }

  Param& weight() noexcept { return weight_; }
  Param& bias() noexcept { return bias_; }

 private:
  std::string name_;
  Param weight_;
  Param bias_;
  Tensor x_q_;  // quantized input
  Tensor w_q_;  // quantized weights
};

/// Valid (no padding), stride-1 2-D convolution on [batch, c, h, w]
/// inputs, lowered to the same quantized matmul as Linear.
class Conv2d final : public Layer {
 public:
  Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels,
         std::size_t kernel, std::mt19937_64& rng);

  Tensor forward(const Tensor& x, const PassContext& ctx) override;
  Tensor backward(const Tensor& dy, const PassContext& ctx,
                  bool need_input_grad) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  [[nodiscard]] const std::string& name() const override { return name_; }

  Param& weight() noexcept { return weight_; }
  Param& bias() noexcept { return bias_; }

 private:
  std::string name_;
  std::size_t in_channels_;
  std::size_t out_channels_;
  std::size_t kernel_;
  Param weight_;  // [out, in * k * k]
  Param bias_;
  std::vector<std::size_t> input_shape_;
  Tensor cols_q_;  // im2col of the quantized input
  Tensor w_q_;
};

class Relu final : public Layer {
 public:
  explicit Relu(std::string name) : name_(std::move(name)) {}
  Tensor forward(const Tensor& x, const PassContext& ctx) override;
  Tensor backward(const Tensor& dy, const PassContext& ctx,
                  bool need_input_grad) override;
  [[nodiscard]] const std::string& name() const override { return name_; }

 private:
  std::string name_;
  Tensor mask_;
};

/// [batch, ...] -> [batch, features]. No rounding: values pass unchanged.
class Flatten final : public Layer {
 public:
  explicit Flatten(std::string name) : name_(std::move(name)) {}
  Tensor forward(const Tensor& x, const PassContext& ctx) override;
  Tensor backward(const Tensor& dy, const PassContext& ctx,
                  bool need_input_grad) override;
  [[nodiscard]] const std::string& name() const override { return name_; }

 private:
  std::string name_;
  std::vector<std::size_t> input_shape_;
};

class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor forward(const Tensor& x, const PassContext& ctx);
  /// Back-propagates dL/dY; parameter gradients are overwritten.
  void backward(const Tensor& dy, const PassContext& ctx);

  [[nodiscard]] std::vector<Param*> params();
  [[nodiscard]] std::vector<const Param*> params() const;
  [[nodiscard]] std::size_t layer_count() const noexcept { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Uniform float in [lo, hi) from the top 24 bits of one draw; portable
/// across standard libraries, unlike std::uniform_real_distribution.
[[nodiscard]] float uniform(std::mt19937_64& rng, float lo, float hi);

}  // namespace fpemu

#endif  // FPEMU_LAYERS_HPP
