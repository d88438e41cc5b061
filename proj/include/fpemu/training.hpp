// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef FPEMU_TRAINING_HPP
#define FPEMU_TRAINING_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fpemu/instructions.hpp"
#include "fpemu/layers.hpp"
#include "fpemu/loss_scaler.hpp"
#include "fpemu/telemetry.hpp"

namespace fpemu {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bundled toy workloads.
///  - regression: 8 inputs -> 1 output, small-magnitude noisy linear
///    teacher, MLP 8-16-16-1, mean squared error
///  - mlp: 3 overlapping Gaussian blobs in 2-D, MLP 2-32-32-3, cross-entropy
///  - cnn: 8x8 noisy bar/diagonal images in 4 classes, conv3x3(4) + linear,
///    cross-entropy
enum class Task { Regression, Mlp, Cnn };

[[nodiscard]] std::string_view to_string(Task task) noexcept;
[[nodiscard]] Task parse_task(std::string_view text);

struct Dataset {
  Task task = Task::Regression;
  Tensor inputs;   // [n, ...]
  Tensor targets;  // regression: [n, 1]
  std::vector<int> labels;  // classification
  int classes = 0;

  [[nodiscard]] std::size_t size() const { return inputs.dim(0); }
  /// Gathers rows `idx` into a batch.
  [[nodiscard]] Tensor batch_inputs(std::span<const std::size_t> idx) const;
};

/// Deterministic for a given seed on any platform.
[[nodiscard]] Dataset make_dataset(Task task, std::uint64_t seed);
[[nodiscard]] Sequential make_model(Task task, std::uint64_t seed);

/// Loss at binary32 and dL/dY for the task's loss function.
struct LossResult {
  float loss = 0.0f;
  Tensor grad;
};
[[nodiscard]] LossResult compute_loss(const Dataset& data, const Tensor& output,
                                      std::span<const std::size_t> idx);

/// A complete, reproducible description of a run.
struct TrainConfig {
  std::string run_id = "run";
  Task task = Task::Regression;
  /// Absent: no rounding at layer boundaries (binary32 baseline).
  std::optional<FpFormat> format;
  AccumMode mode;
  bool dls = false;
  LossScalerConfig scaler;
  std::uint64_t seed = 1;
  std::int64_t steps = 600;
  std::size_t batch_size = 32;
  float learning_rate = 0.05f;
  float momentum = 0.9f;
  /// Final loss at or below this counts as converged; above it, degraded.
  double converge_loss = 1.0;
  /// Consecutive non-skipped steps with a non-finite loss before giving up.
  std::int64_t diverge_patience = 20;
  std::int64_t telemetry_every = 1;
  bool telemetry = true;
  unsigned threads = 1;

  /// Parses `key = value` lines; '#' starts a comment. Unknown keys and
  /// malformed values throw ConfigError.
  static TrainConfig parse(std::string_view text);
  static TrainConfig load(const std::filesystem::path& path);
  /// Canonical key=value text; parse(to_text()) round-trips.
  [[nodiscard]] std::string to_text() const;
  [[nodiscard]] std::string format_spec() const;
};

enum class Outcome { Converged, Degraded, Diverged };

[[nodiscard]] std::string_view to_string(Outcome outcome) noexcept;
[[nodiscard]] Outcome parse_outcome(std::string_view text);

struct LossRow {
  std::int64_t step = 0;
  float loss = 0.0f;
  float scale = 1.0f;
  bool skipped = false;

  friend bool operator==(const LossRow&, const LossRow&) = default;
};

struct TrainResult {
  Sequential model;
  std::vector<LossRow> curve;
  /// Absent when telemetry was disabled.
  std::optional<RunSummary> summary;
  float final_loss = 0.0f;
  Outcome outcome = Outcome::Converged;
  std::int64_t steps_run = 0;
};

/// Runs the full training loop. Deterministic given the config.
[[nodiscard]] TrainResult train(const TrainConfig& config);

/// Mean loss over the whole dataset under the model's numerics.
[[nodiscard]] float evaluate(Sequential& model, const Dataset& data,
                             const QuantSpec& quant, std::size_t batch_size);

/// "step,loss,scale,skipped" CSV; floats printed with 9 significant digits.
[[nodiscard]] std::string loss_curve_csv(const std::vector<LossRow>& curve);

/// Summary JSON plus run outcome fields, as read back by `report`.
[[nodiscard]] std::string run_report_json(const TrainConfig& config,
                                          const TrainResult& result);

/// One row of a cross-run comparison table.
struct RunRow {
  std::string run_id;
  std::string format;
  bool dls = false;
  std::string accum_mode;
  double global_max = 0.0;
  double final_loss = 0.0;
  std::string outcome;
};

[[nodiscard]] RunRow parse_run_report(std::string_view json_text);

/// Fixed-width table, one row per run, in the given order.
[[nodiscard]] std::string format_run_table(const std::vector<RunRow>& rows);

/// Writes loss.csv, telemetry.csv, telemetry.json, summary.json and
/// config.txt into `dir` (created if needed).
void write_run_outputs(const std::filesystem::path& dir,
                       const TrainConfig& config, const TrainResult& result);

}  // namespace fpemu

#endif  // FPEMU_TRAINING_HPP
