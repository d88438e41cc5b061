// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

// Finite-difference gradient check. The loss is re-evaluated by an
// independent double-precision forward pass that reads the model's
// parameters; the analytic side is the library's binary32 backward with
// quantization disabled.

#ifndef FPEMU_TESTS_GRADCHECK_HPP
#define FPEMU_TESTS_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fpemu/layers.hpp"
#include "fpemu/training.hpp"

namespace fpemu::testing {

struct DoubleParams {
  std::vector<std::vector<double>> values;  // parallel to Sequential::params()
};

struct DoubleForward {
  double loss = 0.0;
  std::vector<bool> relu_signs;  // sign pattern of every ReLU input
};

/// Forward pass in double for the layer kinds the library ships.
inline DoubleForward double_forward(Sequential& model, const DoubleParams& p,
                                    const Dataset& data, std::span<const std::size_t> idx) {
  DoubleForward out;
  const Tensor x0 = data.batch_inputs(idx);
  std::vector<double> act(x0.data().begin(), x0.data().end());
  std::vector<std::size_t> shape = x0.shape();
  std::size_t pi = 0;
  for (std::size_t li = 0; li < model.layer_count(); ++li) {
    Layer& layer = model.layer(li);
    const std::size_t batch = shape[0];
    if (auto* lin = dynamic_cast<Linear*>(&layer)) {
      const auto& w = p.values[pi];
      const auto& b = p.values[pi + 1];
      pi += 2;
      const std::size_t out_f = lin->weight().value.dim(0);
      const std::size_t in_f = lin->weight().value.dim(1);
      std::vector<double> y(batch * out_f);
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t o = 0; o < out_f; ++o) {
          double s = b[o];
          for (std::size_t i = 0; i < in_f; ++i) s += act[n * in_f + i] * w[o * in_f + i];
          y[n * out_f + o] = s;
        }
      }
      act = std::move(y);
      shape = {batch, out_f};
    } else if (auto* conv = dynamic_cast<Conv2d*>(&layer)) {
      const auto& w = p.values[pi];
      const auto& b = p.values[pi + 1];
      pi += 2;
      const std::size_t oc = conv->weight().value.dim(0);
      const std::size_t ic = shape[1], h = shape[2], wd = shape[3];
      const std::size_t k = static_cast<std::size_t>(
          std::lround(std::sqrt(static_cast<double>(conv->weight().value.dim(1) / ic))));
      const std::size_t oh = h - k + 1, ow = wd - k + 1;
      std::vector<double> y(batch * oc * oh * ow);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t o = 0; o < oc; ++o)
          for (std::size_t yy = 0; yy < oh; ++yy)
            for (std::size_t xx = 0; xx < ow; ++xx) {
              double s = b[o];
              for (std::size_t c = 0; c < ic; ++c)
                for (std::size_t i = 0; i < k; ++i)
                  for (std::size_t j = 0; j < k; ++j)
                    s += act[((n * ic + c) * h + yy + i) * wd + xx + j] *
                         w[o * ic * k * k + (c * k + i) * k + j];
              y[((n * oc + o) * oh + yy) * ow + xx] = s;
            }
      act = std::move(y);
      shape = {batch, oc, oh, ow};
    } else if (dynamic_cast<Relu*>(&layer)) {
      for (double& v : act) {
        out.relu_signs.push_back(v > 0.0);
        v = std::max(v, 0.0);
      }
    } else if (dynamic_cast<Flatten*>(&layer)) {
      shape = {batch, act.size() / batch};
    }
  }

  const std::size_t batch = shape[0];
  const std::size_t cols = shape[1];
  double sum = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    if (data.task == Task::Regression) {
      const double d = act[n] - static_cast<double>(data.targets.at(idx[n], 0));
      sum += d * d;
    } else {
      double top = act[n * cols];
      for (std::size_t c = 1; c < cols; ++c) top = std::max(top, act[n * cols + c]);
      double z = 0.0;
      for (std::size_t c = 0; c < cols; ++c) z += std::exp(act[n * cols + c] - top);
      const auto label = static_cast<std::size_t>(data.labels[idx[n]]);
      sum += -(act[n * cols + label] - top - std::log(z));
    }
  }
  out.loss = sum / static_cast<double>(data.task == Task::Regression ? batch * cols : batch);
  return out;
}

struct GradCheckResult {
  int checked = 0;
  int kinks_skipped = 0;
  double worst_rel = 0.0;
};

/// Compares g.v against central differences along `directions` random
/// unit directions. Directions whose +-h probe crosses a ReLU kink are
/// redrawn so that exactly `directions` smooth cases are checked.
inline GradCheckResult gradient_check(Task task, std::uint64_t seed, int directions,
                                      std::size_t batch = 8) {
  const Dataset data = make_dataset(task, seed);
  Sequential model = make_model(task, seed);
  std::mt19937_64 rng(seed * 7919 + 1);

  // Random non-zero biases so their gradients are exercised too.
  for (Param* p : model.params()) {
    if (p->name.ends_with(".bias")) {
      for (float& v : p->value.storage()) v = uniform(rng, -0.2f, 0.2f);
    }
  }

  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = static_cast<std::size_t>(rng() % data.size());

  const QuantSpec quant{};
  const PassContext ctx{&quant, nullptr, 0};
  const Tensor x = data.batch_inputs(idx);
  const Tensor y = model.forward(x, ctx);
  const LossResult loss = compute_loss(data, y, idx);
  model.backward(loss.grad, ctx);

  const auto params = model.params();
  DoubleParams base;
  for (const Param* p : params) base.values.emplace_back(p->value.data().begin(), p->value.data().end());

  GradCheckResult result;
  const double h = 1e-6;
  int attempts = 0;
  while (result.checked < directions && attempts < directions * 20) {
    ++attempts;
    std::vector<std::vector<double>> dir;
    double norm2 = 0.0;
    for (const Param* p : params) {
      std::vector<double> d(p->value.size());
      for (double& v : d) {
        v = static_cast<double>(uniform(rng, -1.0f, 1.0f));
        norm2 += v * v;
      }
      dir.push_back(std::move(d));
    }
    const double inv = 1.0 / std::sqrt(norm2);
    double analytic = 0.0;
    DoubleParams plus = base, minus = base;
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (std::size_t i = 0; i < dir[k].size(); ++i) {
        const double d = dir[k][i] * inv;
        analytic += static_cast<double>(params[k]->grad[i]) * d;
        plus.values[k][i] += h * d;
        minus.values[k][i] -= h * d;
      }
    }
    const DoubleForward fp = double_forward(model, plus, data, idx);
    const DoubleForward fm = double_forward(model, minus, data, idx);
    if (fp.relu_signs != fm.relu_signs) {
      ++result.kinks_skipped;
      continue;
    }
    const double numeric = (fp.loss - fm.loss) / (2.0 * h);
    const double scale = std::max({std::fabs(analytic), std::fabs(numeric), 1e-12});
    result.worst_rel = std::max(result.worst_rel, std::fabs(analytic - numeric) / scale);
    ++result.checked;
  }
  return result;
}

}  // namespace fpemu::testing

#endif  // FPEMU_TESTS_GRADCHECK_HPP
