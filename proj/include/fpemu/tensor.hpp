// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef FPEMU_TENSOR_HPP
#define FPEMU_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fpemu {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major tensor of binary32 surrogates.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, float fill = 0.0f)
      : shape_(std::move(shape)), data_(count(shape_), fill) {}
  Tensor(std::vector<std::size_t> shape, std::vector<float> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_)) {
      throw ShapeError("tensor data size does not match shape");
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, float fill = 0.0f) {
    return Tensor({rows, cols}, fill);
  }

  [[nodiscard]] const std::vector<std::size_t>& shape() const noexcept {
    return shape_;
  }
  [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] std::size_t dim(std::size_t i) const { return shape_.at(i); }

  [[nodiscard]] std::span<float> data() noexcept { return data_; }
  [[nodiscard]] std::span<const float> data() const noexcept { return data_; }
  [[nodiscard]] std::vector<float>& storage() noexcept { return data_; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  // 2-D access
  [[nodiscard]] std::size_t rows() const { return shape_.at(0); }
  [[nodiscard]] std::size_t cols() const { return shape_.at(1); }
  float& at(std::size_t r, std::size_t c) noexcept {
    return data_[r * shape_[1] + c];
  }
  [[nodiscard]] float at(std::size_t r, std::size_t c) const noexcept {
    return data_[r * shape_[1] + c];
  }

  void reshape(std::vector<std::size_t> shape) {
    if (count(shape) != data_.size()) {
      throw ShapeError("reshape changes element count");
    }
    shape_ = std::move(shape);
  }

  [[nodiscard]] Tensor transposed() const;

  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<float> data_;
};

inline Tensor Tensor::transposed() const {
  if (rank() != 2) throw ShapeError("transpose requires a matrix");
  Tensor out = matrix(cols(), rows());
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < cols(); ++c) out.at(c, r) = at(r, c);
  }
  return out;
}

/// True if the two tensors have identical shapes and identical bits
/// (distinguishes -0 from +0 and compares NaNs by pattern).
[[nodiscard]] bool bit_identical(const Tensor& a, const Tensor& b) noexcept;

}  // namespace fpemu

#endif  // FPEMU_TENSOR_HPP
