// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fpemu/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fpemu {

namespace {

constexpr std::string_view kPhaseNames[] = {
    "forward_activation", "weight", "activation_gradient"};

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::int64_t parse_i64(std::string_view text) {
  std::int64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw TelemetryError("telemetry: bad integer '" + std::string(text) + "'");
  }
  return v;
}

std::string format_fraction(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", f);
  return buf;
}

}  // namespace

std::string_view to_string(Phase phase) noexcept {
  return kPhaseNames[static_cast<std::size_t>(phase)];
}

Phase parse_phase(std::string_view text) {
  for (std::size_t i = 0; i < std::size(kPhaseNames); ++i) {
    if (kPhaseNames[i] == text) return static_cast<Phase>(i);
  }
  throw TelemetryError("unknown phase '" + std::string(text) + "'");
}

std::int64_t ClassCounts::total() const noexcept {
  std::int64_t sum = 0;
  for (auto c : n) sum += c;
  return sum;
}

double DenormalStats::fraction_denormal() const noexcept {
  const auto total = counts.total();
  if (total == 0) return 0.0;
  return static_cast<double>(counts[FpClass::Denormal]) /
         static_cast<double>(total);
}

ClassCounts count_classes(std::span<const float> values,
                          const FpFormat& format) noexcept {
  ClassCounts counts;
  for (float v : values) ++counts[classify(v, format)];
  return counts;
}

std::map<int, std::int64_t> binade_histogram(std::span<const float> values) {
  std::map<int, std::int64_t> hist;
  for (float v : values) {
    if (!std::isfinite(v) || v == 0.0f) continue;
    int exp = 0;
    std::frexp(v, &exp);
    ++hist[exp - 1];
  }
  return hist;
}

void RunLog::record(DenormalStats stats) {
  for (auto c : stats.counts.n) {
    if (c < 0) throw TelemetryError("telemetry: negative class count");
  }
  const double fraction = stats.fraction_denormal();
  std::lock_guard lock(mutex_);
  Key key{stats.tensor_id, stats.phase, stats.step};
  if (records_.contains(key)) {
    throw TelemetryError("telemetry: duplicate record for tensor '" +
                         stats.tensor_id + "' phase " +
                         std::string(to_string(stats.phase)) + " step " +
                         std::to_string(stats.step));
  }
  records_.emplace(std::move(key), stats.counts);
  auto& m = maxima_[{stats.tensor_id, stats.phase}];
  m = std::max(m, fraction);
  global_max_ = std::max(global_max_, fraction);
}

std::size_t RunLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

double RunLog::running_global_max() const {
  std::lock_guard lock(mutex_);
  return global_max_;
}

RunSummary RunLog::summarize() const {
  std::vector<DenormalStats> records;
  {
    std::lock_guard lock(mutex_);
    if (records_.empty()) throw TelemetryError("summarize: empty run log");
    records.reserve(records_.size());
    for (const auto& [key, counts] : records_) {
      records.push_back({key.tensor_id, key.phase, key.step, counts});
    }
  }
  return fpemu::summarize(info_, std::move(records));
}

RunSummary summarize(const RunInfo& info, std::vector<DenormalStats> records) {
  RunSummary s;
  s.run_id = info.run_id;
  s.format = info.format;
  s.dls = info.dls;
  s.accum_mode = info.accum_mode;
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.tensor_id, a.phase, a.step) <
           std::tie(b.tensor_id, b.phase, b.step);
  });
  for (const auto& r : records) {
    const double f = r.fraction_denormal();
    if (s.per_tensor.empty() || s.per_tensor.back().tensor_id != r.tensor_id ||
        s.per_tensor.back().phase != r.phase) {
      s.per_tensor.push_back({r.tensor_id, r.phase, f});
    } else {
      s.per_tensor.back().max_fraction =
          std::max(s.per_tensor.back().max_fraction, f);
    }
    s.global_max = std::max(s.global_max, f);
  }
  s.records = std::move(records);
  return s;
}

std::string to_csv(const RunSummary& summary) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : summary.records) {
    out += summary.run_id;
    out += ',';
    out += r.tensor_id;
    out += ',';
    out += to_string(r.phase);
    out += ',';
    out += std::to_string(r.step);
    for (auto c : r.counts.n) {
      out += ',';
      out += std::to_string(c);
    }
    out += ',';
    out += format_fraction(r.fraction_denormal());
    out += '\n';
  }
  return out;
}

RunSummary summary_from_csv(std::string_view text, RunInfo info) {
  std::vector<DenormalStats> records;
  std::size_t line_no = 0;
  bool have_run_id = false;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no++ == 0) {
      if (line != kCsvHeader) throw TelemetryError("telemetry CSV: bad header");
      continue;
    }
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 10) {
      throw TelemetryError("telemetry CSV: line " + std::to_string(line_no) +
                           " has " + std::to_string(cols.size()) + " columns");
    }
    if (!have_run_id) {
      info.run_id = std::string(cols[0]);
      have_run_id = true;
    }
    DenormalStats r;
    r.tensor_id = std::string(cols[1]);
    r.phase = parse_phase(cols[2]);
    r.step = parse_i64(cols[3]);
    for (std::size_t i = 0; i < kFpClassCount; ++i) {
      r.counts.n[i] = parse_i64(cols[4 + i]);
    }
    records.push_back(std::move(r));
  }
  if (line_no == 0) throw TelemetryError("telemetry CSV: empty input");
  return summarize(info, std::move(records));
}

std::string to_json(const RunSummary& summary) {
  nlohmann::ordered_json j;
  j["run_id"] = summary.run_id;
  j["format"] = summary.format;
  j["dls"] = summary.dls;
  j["accum_mode"] = summary.accum_mode;
  j["global_max"] = summary.global_max;
  auto& per = j["per_tensor"] = nlohmann::ordered_json::array();
  for (const auto& t : summary.per_tensor) {
    per.push_back({{"tensor_id", t.tensor_id},
                   {"phase", to_string(t.phase)},
                   {"max_fraction", t.max_fraction}});
  }
  auto& recs = j["records"] = nlohmann::ordered_json::array();
  for (const auto& r : summary.records) {
    recs.push_back({{"run_id", summary.run_id},
                    {"tensor_id", r.tensor_id},
                    {"phase", to_string(r.phase)},
                    {"step", r.step},
                    {"n_zero", r.counts[FpClass::Zero]},
                    {"n_denormal", r.counts[FpClass::Denormal]},
                    {"n_normal", r.counts[FpClass::Normal]},
                    {"n_inf", r.counts[FpClass::Infinity]},
                    {"n_nan", r.counts[FpClass::NaN]},
                    {"fraction", r.fraction_denormal()}});
  }
  return j.dump(2) + "\n";
}

RunSummary summary_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunInfo info;
    info.run_id = j.at("run_id").get<std::string>();
    info.format = j.at("format").get<std::string>();
    info.dls = j.at("dls").get<bool>();
    info.accum_mode = j.at("accum_mode").get<std::string>();
    std::vector<DenormalStats> records;
    for (const auto& r : j.at("records")) {
      DenormalStats s;
      s.tensor_id = r.at("tensor_id").get<std::string>();
      s.phase = parse_phase(r.at("phase").get<std::string>());
      s.step = r.at("step").get<std::int64_t>();
      s.counts[FpClass::Zero] = r.at("n_zero").get<std::int64_t>();
      s.counts[FpClass::Denormal] = r.at("n_denormal").get<std::int64_t>();
      s.counts[FpClass::Normal] = r.at("n_normal").get<std::int64_t>();
      s.counts[FpClass::Infinity] = r.at("n_inf").get<std::int64_t>();
      s.counts[FpClass::NaN] = r.at("n_nan").get<std::int64_t>();
      records.push_back(std::move(s));
    }
    return summarize(info, std::move(records));
  } catch (const nlohmann::json::exception& e) {
    throw TelemetryError(std::string("telemetry JSON: ") + e.what());
  }
}

void export_summary(const RunSummary& summary,
                    const std::filesystem::path& path, ExportFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TelemetryError("cannot open '" + path.string() + "' for writing");
  out << (format == ExportFormat::Csv ? to_csv(summary) : to_json(summary));
  out.flush();
  if (!out) throw TelemetryError("write to '" + path.string() + "' failed");
}

RunSummary import_summary(const std::filesystem::path& path,
                          ExportFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TelemetryError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  return format == ExportFormat::Csv ? summary_from_csv(text)
                                     : summary_from_json(text);
}

}  // namespace fpemu
