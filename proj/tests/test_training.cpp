// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fpemu/loss_scaler.hpp"
#include "fpemu/training.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

namespace fpemu {
namespace {

using testing::bits;
using testing::p2;

// --- loss scaler -----------------------------------------------------------

TEST(LossScaler, InfinityHalvesAndSkips) {
  LossScaler s;
  std::vector<float> g = {1.0f, INFINITY};
  std::vector<std::span<float>> grads = {g};
  EXPECT_EQ(s.scale(), p2(15));
  EXPECT_EQ(s.step(grads), LossScaler::Decision::SkipStep);
  EXPECT_EQ(s.scale(), p2(14));
  EXPECT_EQ(g[0], 1.0f);  // untouched on skip
  g[1] = NAN;
  EXPECT_EQ(s.step(grads), LossScaler::Decision::SkipStep);
  EXPECT_EQ(s.scale(), p2(13));
}

TEST(LossScaler, GrowsAfterCleanInterval) {
  LossScaler s(LossScalerConfig{4, 3, 0, 5});
  std::vector<float> g = {16.0f};
  std::vector<std::span<float>> grads = {g};
  for (int i = 0; i < 2; ++i) {
    g[0] = 16.0f;
    EXPECT_EQ(s.step(grads), LossScaler::Decision::Proceed);
    EXPECT_EQ(g[0], 1.0f);
  }
  EXPECT_EQ(s.scale_log2(), 4);
  static_cast<void>(s.step(grads));
  EXPECT_EQ(s.scale_log2(), 5);
  for (int i = 0; i < 6; ++i) static_cast<void>(s.step(grads));
  EXPECT_EQ(s.scale_log2(), 5);  // capped
}

TEST(LossScaler, FloorsAtMinimum) {
  LossScaler s(LossScalerConfig{1, 10, 0, 24});
  std::vector<float> g = {INFINITY};
  std::vector<std::span<float>> grads = {g};
  for (int i = 0; i < 4; ++i) static_cast<void>(s.step(grads));
  EXPECT_EQ(s.scale(), 1.0f);
}

TEST(LossScaler, UnscaleIsExact) {
  std::mt19937_64 rng(41);
  LossScaler s(LossScalerConfig{10, 1000, 0, 24});
  for (int i = 0; i < 10000; ++i) {
    const float g = std::ldexp(uniform(rng, -1.0f, 1.0f), static_cast<int>(rng() % 60) - 30);
    std::vector<float> v = {g * s.scale()};
    std::vector<std::span<float>> grads = {v};
    ASSERT_EQ(s.step(grads), LossScaler::Decision::Proceed);
    ASSERT_EQ(bits(v[0]), bits(g));
  }
}

TEST(LossScaler, RejectsBadConfig) {
  EXPECT_THROW(LossScaler(LossScalerConfig{30, 10, 0, 24}), std::invalid_argument);
  EXPECT_THROW(LossScaler(LossScalerConfig{5, 0, 0, 24}), std::invalid_argument);
}

// --- layers ----------------------------------------------------------------

TEST(Linear, ZeroInputZeroWeights) {
  std::mt19937_64 rng(1);
  Linear fc("fc", 3, 2, rng);
  for (float& v : fc.weight().value.storage()) v = 0.0f;
  const QuantSpec q{formats::kHalf, AccumMode::parse("fmac8")};
  const PassContext ctx{&q, nullptr, 0};
  const Tensor y = fc.forward(Tensor::matrix(4, 3), ctx);
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
  const Tensor dx = fc.backward(Tensor::matrix(4, 2), ctx, true);
  for (float v : dx.data()) EXPECT_EQ(v, 0.0f);
  for (float v : fc.weight().grad.data()) EXPECT_EQ(v, 0.0f);
  for (float v : fc.bias().grad.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Linear, HandSizedForward) {
  std::mt19937_64 rng(1);
  Linear fc("fc", 2, 2, rng);
  fc.weight().value = Tensor({2, 2}, {0.2f, 1.0f / 3.0f, -1.5f, 1e-6f});
  fc.bias().value = Tensor({2}, {0.01f, 70000.0f});
  const Tensor x({1, 2}, {0.1f, 3.0f});
  const QuantSpec q{formats::kHalf, AccumMode{}};
  const PassContext ctx{&q, nullptr, 0};
  const Tensor y = fc.forward(x, ctx);

  const auto& W = fc.weight().value;
  const auto& B = fc.bias().value;
  auto R = [](float v) { return round_value(v, formats::kHalf); };
  for (std::size_t o = 0; o < 2; ++o) {
    float acc = std::fmaf(R(x[0]), R(W.at(o, 0)), 0.0f);
    acc = std::fmaf(R(x[1]), R(W.at(o, 1)), acc);
    const float want = R(R(acc) + R(B[o]));
    EXPECT_EQ(bits(y.at(0, o)), bits(want)) << o;
  }
  EXPECT_EQ(y.at(0, 1), INFINITY);  // 70000 overflows the half bias
}

// Independent binary32 forward for the MLP: fmaf accumulation in
// ascending index order, bias added once.
Tensor plain_mlp_forward(Sequential& model, const Tensor& x) {
  Tensor act = x;
  for (std::size_t li = 0; li < model.layer_count(); ++li) {
    if (auto* fc = dynamic_cast<Linear*>(&model.layer(li))) {
      const Tensor& w = fc->weight().value;
      const Tensor& b = fc->bias().value;
      Tensor y = Tensor::matrix(act.rows(), w.rows());
      for (std::size_t n = 0; n < act.rows(); ++n) {
        for (std::size_t o = 0; o < w.rows(); ++o) {
          float acc = 0.0f;
          for (std::size_t i = 0; i < w.cols(); ++i) acc = std::fmaf(act.at(n, i), w.at(o, i), acc);
          y.at(n, o) = acc + b[o];
        }
      }
      act = std::move(y);
    } else {
      for (float& v : act.storage()) v = v > 0.0f ? v : 0.0f;
    }
  }
  return act;
}

TEST(Sequential, IdentityWidthMatchesPlainForward) {
  Sequential model = make_model(Task::Mlp, 3);
  std::mt19937_64 rng(3);
  for (Param* p : model.params()) {
    for (float& v : p->value.storage()) v = uniform(rng, -1.0f, 1.0f);
  }
  Tensor x = Tensor::matrix(16, 2);
  for (float& v : x.storage()) v = uniform(rng, -2.0f, 2.0f);
  const QuantSpec q{formats::kBinary32, AccumMode{}};
  const PassContext ctx{&q, nullptr, 0};
  EXPECT_TRUE(bit_identical(model.forward(x, ctx), plain_mlp_forward(model, x)));
}

TEST(Sequential, ZeroUpstreamGradientGivesZeroGradients) {
  Sequential model = make_model(Task::Cnn, 2);
  const Dataset data = make_dataset(Task::Cnn, 2);
  std::vector<std::size_t> idx = {0, 1, 2};
  const QuantSpec q{formats::kHalf, AccumMode::parse("fmac8")};
  const PassContext ctx{&q, nullptr, 0};
  const Tensor y = model.forward(data.batch_inputs(idx), ctx);
  model.backward(Tensor(y.shape()), ctx);
  for (const Param* p : model.params()) {
    for (float v : p->grad.data()) ASSERT_EQ(v, 0.0f) << p->name;
  }
}

TEST(Sequential, TelemetryCoversLayerBoundaries) {
  Sequential model = make_model(Task::Mlp, 2);
  const Dataset data = make_dataset(Task::Mlp, 2);
  std::vector<std::size_t> idx = {0, 1, 2, 3};
  RunLog log;
  const QuantSpec q{formats::kHalf, AccumMode{}};
  const PassContext ctx{&q, &log, 0};
  const Tensor y = model.forward(data.batch_inputs(idx), ctx);
  model.backward(compute_loss(data, y, idx).grad, ctx);
  const RunSummary s = log.summarize();
  std::vector<std::string> ids;
  for (const auto& t : s.per_tensor) ids.push_back(t.tensor_id + "/" + std::string(to_string(t.phase)));
  const std::vector<std::string> want = {
      "fc1.out/forward_activation", "fc1.weight/weight",
      "fc2.grad/activation_gradient", "fc2.out/forward_activation", "fc2.weight/weight",
      "fc3.grad/activation_gradient", "fc3.out/forward_activation", "fc3.weight/weight"};
  EXPECT_EQ(ids, want);
}

TEST(GradientCheck, SmallMlp) {
  const auto r = testing::gradient_check(Task::Mlp, 9, 20);
  EXPECT_EQ(r.checked, 20);
  EXPECT_LE(r.worst_rel, 1e-4);
}

TEST(GradientCheck, SmallCnn) {
  const auto r = testing::gradient_check(Task::Cnn, 9, 20, 4);
  EXPECT_EQ(r.checked, 20);
  EXPECT_LE(r.worst_rel, 1e-4);
}

// --- config ----------------------------------------------------------------

TEST(TrainConfig, ParseAndRoundTrip) {
  const TrainConfig c = TrainConfig::parse(
      "# comment\nrun_id = r\ntask = cnn\nformat = 1/6/9/n\nmode = fmac8\n"
      "dls = on\ndls_init_scale = 2^10\ndls_growth_interval=50\nseed = 4\nsteps = 10\n"
      "lr = 0.01 # inline\n");
  EXPECT_EQ(c.task, Task::Cnn);
  EXPECT_EQ(c.format, formats::kE6M9Ftz);
  EXPECT_EQ(c.mode.kind, AccumKind::Fmac8);
  EXPECT_TRUE(c.dls);
  EXPECT_EQ(c.scaler.init_scale_log2, 10);
  EXPECT_EQ(c.scaler.growth_interval, 50);
  EXPECT_EQ(c.steps, 10);
  EXPECT_EQ(c.learning_rate, 0.01f);
  const TrainConfig back = TrainConfig::parse(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_FALSE(TrainConfig::parse("format = none\n").format.has_value());
}

TEST(TrainConfig, RejectsBadInput) {
  for (const char* bad : {"colour = red\n", "steps = -3\n", "format = 1/9/6/d\n",
                          "dls = maybe\n", "dls_init_scale = 3\n", "no equals sign\n",
                          "task = resnet\n", "lr = fast\n"}) {
    EXPECT_THROW(static_cast<void>(TrainConfig::parse(bad)), ConfigError) << bad;
  }
}

// --- training --------------------------------------------------------------

TrainConfig short_config(Task task, std::optional<FpFormat> fmt, bool dls) {
  TrainConfig c;
  c.task = task;
  c.format = fmt;
  c.dls = dls;
  c.steps = 60;
  return c;
}

TEST(Train, DeterministicCurvesAndTelemetry) {
  for (Task t : {Task::Regression, Task::Mlp, Task::Cnn}) {
    const TrainConfig c = short_config(t, formats::kHalf, true);
    const TrainResult a = train(c);
    const TrainResult b = train(c);
    EXPECT_EQ(loss_curve_csv(a.curve), loss_curve_csv(b.curve)) << to_string(t);
    EXPECT_EQ(to_csv(*a.summary), to_csv(*b.summary)) << to_string(t);
  }
}

TEST(Train, IdentityWidthEqualsUnquantized) {
  const TrainResult wide = train(short_config(Task::Mlp, formats::kBinary32, false));
  const TrainResult none = train(short_config(Task::Mlp, std::nullopt, false));
  EXPECT_EQ(loss_curve_csv(wide.curve), loss_curve_csv(none.curve));
  const auto pw = wide.model.params();
  const auto pn = none.model.params();
  ASSERT_EQ(pw.size(), pn.size());
  for (std::size_t i = 0; i < pw.size(); ++i) EXPECT_TRUE(bit_identical(pw[i]->value, pn[i]->value));
}

TEST(Train, MasterWeightsStayBinary32) {
  const TrainResult r = train(short_config(Task::Regression, formats::kHalf, true));
  std::int64_t off_grid = 0;
  for (const Param* p : r.model.params()) {
    for (float v : p->value.data()) off_grid += is_representable(v, formats::kHalf) ? 0 : 1;
  }
  EXPECT_GT(off_grid, 0);
}

TEST(Train, DlsSkipsAndBacksOffOnOverflow) {
  // A huge initial scale overflows the half gradients immediately.
  TrainConfig c = short_config(Task::Regression, formats::kHalf, true);
  c.scaler.init_scale_log2 = 24;
  c.steps = 20;
  const TrainResult r = train(c);
  ASSERT_FALSE(r.curve.empty());
  EXPECT_TRUE(r.curve.front().skipped);
  EXPECT_EQ(r.curve[1].scale, r.curve[0].scale / 2.0f);
  EXPECT_NE(r.outcome, Outcome::Diverged);
}

TEST(Train, DivergenceIsAnOutcome) {
  TrainConfig c = short_config(Task::Regression, std::nullopt, false);
  c.learning_rate = 1e6f;
  c.steps = 200;
  const TrainResult r = train(c);
  EXPECT_EQ(r.outcome, Outcome::Diverged);
  EXPECT_LT(r.steps_run, c.steps);
}

TEST(Train, BaselineConverges) {
  TrainConfig c = short_config(Task::Regression, formats::kBinary32, false);
  c.steps = 600;
  const TrainResult r = train(c);
  EXPECT_EQ(r.outcome, Outcome::Converged);
  EXPECT_LT(r.final_loss, 1e-3f);
}

TEST(Report, WritesAndParsesOutputs) {
  const TrainConfig c = short_config(Task::Mlp, formats::kE6M9, false);
  const TrainResult r = train(c);
  const auto dir = std::filesystem::temp_directory_path() / "fpemu_report_test";
  std::filesystem::remove_all(dir);
  write_run_outputs(dir, c, r);
  for (const char* f : {"config.txt", "loss.csv", "telemetry.csv", "telemetry.json", "summary.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "summary.json");
  std::stringstream buf;
  buf << in.rdbuf();
  const RunRow row = parse_run_report(buf.str());
  EXPECT_EQ(row.format, "1/6/9/d");
  EXPECT_EQ(row.global_max, r.summary->global_max);
  EXPECT_EQ(row.outcome, std::string(to_string(r.outcome)));
  const std::string table = format_run_table({row});
  EXPECT_NE(table.find("1/6/9/d"), std::string::npos);
  EXPECT_THROW(static_cast<void>(parse_run_report("{}")), std::exception);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace fpemu
