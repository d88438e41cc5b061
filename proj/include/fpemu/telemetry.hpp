// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef FPEMU_TELEMETRY_HPP
#define FPEMU_TELEMETRY_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fpemu/format.hpp"

namespace fpemu {

class TelemetryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Which role a monitored tensor plays in training.
enum class Phase : std::uint8_t { ForwardActivation, Weight, ActivationGradient };

[[nodiscard]] std::string_view to_string(Phase phase) noexcept;
[[nodiscard]] Phase parse_phase(std::string_view text);

/// Per-class element counts, indexed by FpClass.
struct ClassCounts {
  std::array<std::int64_t, kFpClassCount> n{};

  std::int64_t& operator[](FpClass c) noexcept {
    return n[static_cast<std::size_t>(c)];
  }
  std::int64_t operator[](FpClass c) const noexcept {
    return n[static_cast<std::size_t>(c)];
  }
  [[nodiscard]] std::int64_t total() const noexcept;

  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Class counts of one tensor at one step.
///
/// The denormal fraction is n_denormal / n_total. Zeros (including values
/// flushed to zero) are in the denominator only: a flushed value costs
/// nothing on hardware, so it is not a denormal event.
struct DenormalStats {
  std::string tensor_id;
  Phase phase = Phase::ForwardActivation;
  std::int64_t step = 0;
  ClassCounts counts;

  [[nodiscard]] double fraction_denormal() const noexcept;

  friend bool operator==(const DenormalStats&, const DenormalStats&) = default;
};

/// Counts the classes of `values` with respect to `format`.
[[nodiscard]] ClassCounts count_classes(std::span<const float> values,
                                        const FpFormat& format) noexcept;

/// Per-binade histogram: floor(log2|v|) -> count, finite nonzero only.
[[nodiscard]] std::map<int, std::int64_t> binade_histogram(
    std::span<const float> values);

/// Receives stats from producers; implementations must tolerate
/// concurrent calls.
class TelemetrySink {
 public:
  virtual ~TelemetrySink() = default;
  virtual void record(DenormalStats stats) = 0;
};

/// Identifies where a tensor's stats go.
struct TelemetryTag {
  TelemetrySink* sink = nullptr;
  std::string tensor_id;
  Phase phase = Phase::ForwardActivation;
  std::int64_t step = 0;
};

struct TensorMax {
  std::string tensor_id;
  Phase phase = Phase::ForwardActivation;
  double max_fraction = 0.0;

  friend bool operator==(const TensorMax&, const TensorMax&) = default;
};

/// Aggregated view of a run's telemetry.
struct RunSummary {
  std::string run_id;
  std::string format;
  bool dls = false;
  std::string accum_mode;
  /// Sorted by (tensor_id, phase).
  std::vector<TensorMax> per_tensor;
  double global_max = 0.0;
  /// All records, sorted by (tensor_id, phase, step).
  std::vector<DenormalStats> records;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

/// Run metadata carried into the summary.
struct RunInfo {
  std::string run_id = "run";
  std::string format;
  bool dls = false;
  std::string accum_mode;
};

/// Thread-safe in-memory log of DenormalStats with running maxima.
class RunLog final : public TelemetrySink {
 public:
  explicit RunLog(RunInfo info = {}) : info_(std::move(info)) {}

  /// Appends a record; throws TelemetryError on a duplicate
  /// (tensor_id, step, phase) key or inconsistent counts.
  void record(DenormalStats stats) override;

  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] bool empty() const { return size() == 0; }
  [[nodiscard]] double running_global_max() const;
  [[nodiscard]] const RunInfo& info() const noexcept { return info_; }

  /// Throws TelemetryError if the log is empty.
  [[nodiscard]] RunSummary summarize() const;

 private:
  struct Key {
    std::string tensor_id;
    Phase phase;
    std::int64_t step;
    auto operator<=>(const Key&) const = default;
  };

  RunInfo info_;
  mutable std::mutex mutex_;
  std::map<Key, ClassCounts> records_;
  std::map<std::pair<std::string, Phase>, double> maxima_;
  double global_max_ = 0.0;
};

/// Builds a summary from an arbitrary record set (used for re-import).
[[nodiscard]] RunSummary summarize(const RunInfo& info,
                                   std::vector<DenormalStats> records);

enum class ExportFormat { Csv, Json };

/// CSV columns, in order:
/// run_id,tensor_id,phase,step,n_zero,n_denormal,n_normal,n_inf,n_nan,fraction
inline constexpr std::string_view kCsvHeader =
    "run_id,tensor_id,phase,step,n_zero,n_denormal,n_normal,n_inf,n_nan,"
    "fraction";

[[nodiscard]] std::string to_csv(const RunSummary& summary);
[[nodiscard]] std::string to_json(const RunSummary& summary);

/// Inverse of to_csv. The CSV carries no run metadata besides run_id, so
/// the remaining RunInfo fields come from `info`.
[[nodiscard]] RunSummary summary_from_csv(std::string_view text,
                                          RunInfo info = {});
[[nodiscard]] RunSummary summary_from_json(std::string_view text);

/// Writes the summary; throws TelemetryError on I/O failure.
void export_summary(const RunSummary& summary,
                    const std::filesystem::path& path, ExportFormat format);

[[nodiscard]] RunSummary import_summary(const std::filesystem::path& path,
                                        ExportFormat format);

}  // namespace fpemu

#endif  // FPEMU_TELEMETRY_HPP
