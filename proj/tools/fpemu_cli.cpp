// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

// fpemu: command-line front end for the 16-bit format emulator.
//
// Exit codes: 0 success / converged, 1 usage or runtime error (also a
// MISMATCH verdict or a partial report), 2 degraded, 3 diverged.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fpemu/format.hpp"
#include "fpemu/instructions.hpp"
#include "fpemu/reference.hpp"
#include "fpemu/rounding.hpp"
#include "fpemu/training.hpp"

namespace fs = std::filesystem;
using namespace fpemu;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDegraded = 2;
constexpr int kExitDiverged = 3;

std::string decimal(float v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

std::string encoding_text(float v, const FpFormat& fmt) {
  if (fmt.total_bits() != 16) return "n/a (" + std::to_string(fmt.total_bits()) + "-bit format)";
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%04X", encode16(v, fmt));
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int cmd_format_info(const std::string& spec) {
  const FpFormat fmt = FpFormat::parse(spec);
  const FormatConstants c = format_constants(fmt);
  std::printf("format        %s\n", fmt.to_string().c_str());
  std::printf("bits          %d (sign 1, exponent %d, mantissa %d), bias %d\n",
              fmt.total_bits(), fmt.exp_bits, fmt.mant_bits, fmt.bias());
  std::printf("E_min         %d\n", c.emin);
  std::printf("E_max         %d\n", c.emax);
  if (c.min_denormal_exp) {
    std::printf("min denormal  2^%d (%s)\n", *c.min_denormal_exp,
                decimal(*c.min_denormal).c_str());
  } else {
    std::printf("min denormal  --- (denormals flushed to zero)\n");
  }
  std::printf("min normal    2^%d (%s)\n", c.min_normal_exp, decimal(c.min_normal).c_str());
  std::printf("max finite    (2 - 2^-%d) * 2^%d (%s)\n", fmt.mant_bits, c.emax,
              decimal(c.max_finite).c_str());
  return kExitOk;
}

int cmd_round(const std::string& spec, const std::string& value_text, bool hex) {
  const FpFormat fmt = FpFormat::parse(spec);
  const float x = parse_value(value_text);
  const RoundingOutcome r = roundfp(x, fmt);
  const float v = r.value.value();
  std::printf("input         %s (%s)\n", decimal(x).c_str(), hex_float(x).c_str());
  std::printf("format        %s\n", fmt.to_string().c_str());
  if (hex) {
    std::printf("value         %s (%s)\n", hex_float(v).c_str(), decimal(v).c_str());
  } else {
    std::printf("value         %s (%s)\n", decimal(v).c_str(), hex_float(v).c_str());
  }
  std::printf("encoding      %s\n", encoding_text(v, fmt).c_str());
  std::printf("class         %s\n", std::string(to_string(classify(r.value))).c_str());
  std::printf("flags         %s\n", to_string(r.flags).c_str());
  return kExitOk;
}

// Vector file:
//   # comment
//   w: v0 v1 ...
//   x: v0 v1 ...
//   expect: 0xHHHH        (optional golden encoding)
struct DotFile {
  std::vector<float> w;
  std::vector<float> x;
  std::optional<unsigned> expect;
  bool has_w = false;
  bool has_x = false;
};

DotFile parse_dot_file(const std::string& text) {
  DotFile f;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw std::runtime_error("vector file line " + std::to_string(line_no) +
                               ": expected 'w:', 'x:' or 'expect:'");
    }
    std::string key = line.substr(0, colon);
    key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
    std::istringstream values(line.substr(colon + 1));
    std::string tok;
    if (key == "w" || key == "x") {
      auto& out = key == "w" ? f.w : f.x;
      (key == "w" ? f.has_w : f.has_x) = true;
      while (values >> tok) out.push_back(parse_value(tok));
    } else if (key == "expect") {
      if (!(values >> tok)) throw std::runtime_error("vector file: empty expect");
      f.expect = static_cast<unsigned>(std::stoul(tok, nullptr, 16));
    } else {
      throw std::runtime_error("vector file line " + std::to_string(line_no) +
                               ": unknown key '" + key + "'");
    }
  }
  if (!f.has_w || !f.has_x) throw std::runtime_error("vector file needs 'w:' and 'x:' lines");
  if (f.w.size() != f.x.size()) {
    throw std::runtime_error("vector length mismatch: " + std::to_string(f.w.size()) +
                             " vs " + std::to_string(f.x.size()));
  }
  return f;
}

int cmd_dot(const std::string& spec, const std::string& mode_text, const fs::path& file) {
  const FpFormat fmt = FpFormat::parse(spec);
  const AccumMode mode = AccumMode::parse(mode_text);
  if (mode.kind != AccumKind::Fmac8 && mode.kind != AccumKind::Fmacs) {
    throw std::invalid_argument("dot supports --mode fmac8|fmacs");
  }
  DotFile f = parse_dot_file(read_file(file));
  for (auto* vec : {&f.w, &f.x}) {
    for (float v : *vec) {
      if (!is_representable(v, fmt)) {
        throw std::invalid_argument("input " + hex_float(v) + " is not representable in " +
                                    fmt.to_string());
      }
    }
  }
  const float result = dot(f.w, f.x, mode, fmt);
  const float oracle = mode.kind == AccumKind::Fmac8
                           ? reference::fmac8_dot(f.w, f.x, fmt, mode.chunk)
                           : reference::fmacs_dot(f.w, f.x, fmt);
  const bool match = std::bit_cast<std::uint32_t>(result) == std::bit_cast<std::uint32_t>(oracle);
  std::printf("format        %s\n", fmt.to_string().c_str());
  std::printf("mode          %s\n", mode.to_string().c_str());
  std::printf("length        %zu\n", f.w.size());
  std::printf("result        %s (%s)  encoding %s\n", decimal(result).c_str(),
              hex_float(result).c_str(), encoding_text(result, fmt).c_str());
  std::printf("oracle        %s (%s)  encoding %s\n", decimal(oracle).c_str(),
              hex_float(oracle).c_str(), encoding_text(oracle, fmt).c_str());
  std::printf("verdict       %s\n", match ? "MATCH" : "MISMATCH");
  bool golden_ok = true;
  if (f.expect) {
    golden_ok = fmt.total_bits() == 16 && encode16(result, fmt) == *f.expect;
    std::printf("golden        0x%04X %s\n", *f.expect, golden_ok ? "MATCH" : "MISMATCH");
  }
  return match && golden_ok ? kExitOk : kExitError;
}

int cmd_train(const fs::path& config_path, const std::string& out_dir,
              const std::string& run_id) {
  TrainConfig config = TrainConfig::load(config_path);
  if (!run_id.empty()) config.run_id = run_id;
  const fs::path out = out_dir.empty() ? fs::path("runs") / config.run_id : fs::path(out_dir);
  const TrainResult result = train(config);
  write_run_outputs(out, config, result);
  const double global_max = result.summary ? result.summary->global_max : 0.0;
  std::printf("run           %s\n", config.run_id.c_str());
  std::printf("task          %s\n", std::string(to_string(config.task)).c_str());
  std::printf("format        %s\n", config.format_spec().c_str());
  std::printf("accumulate    %s\n", config.mode.to_string().c_str());
  std::printf("dls           %s\n", config.dls ? "on" : "off");
  std::printf("steps         %lld\n", static_cast<long long>(result.steps_run));
  std::printf("final loss    %s\n", decimal(result.final_loss).c_str());
  std::printf("max denormal  %.6g\n", global_max);
  std::printf("outcome       %s\n", std::string(to_string(result.outcome)).c_str());
  std::printf("outputs       %s\n", out.string().c_str());
  switch (result.outcome) {
    case Outcome::Converged: return kExitOk;
    case Outcome::Degraded: return kExitDegraded;
    case Outcome::Diverged: return kExitDiverged;
  }
  return kExitError;
}

// Rows group by format (narrower exponent first, then wider mantissa,
// denormals before flush-to-zero), with DLS off before on.
bool row_order(const RunRow& a, const RunRow& b) {
  auto key = [](const RunRow& r) {
    int e = 99, p = 0, d = 0;
    try {
      const FpFormat f = FpFormat::parse(r.format);
      e = f.exp_bits;
      p = -f.mant_bits;
      d = f.denormals ? 0 : 1;
    } catch (const FormatError&) {
      e = -1;  // unquantized baseline first
    }
    return std::tuple(e, p, d, r.dls, r.run_id);
  };
  return key(a) < key(b);
}

int cmd_report(const fs::path& runs, const std::string& out_file) {
  if (!fs::is_directory(runs)) throw std::runtime_error("'" + runs.string() + "' is not a directory");
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(runs)) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());

  std::vector<RunRow> rows;
  int warnings = 0;
  for (const auto& entry : entries) {
    fs::path report;
    if (fs::is_directory(entry)) {
      report = entry / "summary.json";
      if (!fs::exists(report)) {
        std::fprintf(stderr, "warning: %s has no summary.json, skipped\n", entry.string().c_str());
        ++warnings;
        continue;
      }
    } else if (entry.extension() == ".json") {
      report = entry;
    } else {
      continue;
    }
    try {
      rows.push_back(parse_run_report(read_file(report)));
    } catch (const std::exception& e) {
      std::fprintf(stderr, "warning: %s: %s\n", report.string().c_str(), e.what());
      ++warnings;
    }
  }
  if (rows.empty() && warnings == 0) {
    throw std::runtime_error("no run summaries found in '" + runs.string() + "'");
  }
  std::stable_sort(rows.begin(), rows.end(), row_order);
  const std::string table = format_run_table(rows);
  std::fputs(table.c_str(), stdout);
  if (!out_file.empty()) {
    std::ofstream out(out_file, std::ios::binary | std::ios::trunc);
    out << table;
    if (!out) throw std::runtime_error("cannot write '" + out_file + "'");
  }
  return warnings == 0 ? kExitOk : kExitError;
}

// Quick end-to-end sanity pass over the headline values.
int cmd_selftest() {
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", what.c_str());
    if (!ok) ++failures;
  };
  const auto half = format_constants(formats::kHalf);
  const auto e6m9 = format_constants(formats::kE6M9);
  const auto bf16 = format_constants(formats::kBfloat16);
  check(half.emin == -14 && half.emax == 15 && half.min_denormal_exp == -24,
        "1/5/10/d constants");
  check(e6m9.emin == -30 && e6m9.emax == 31 && e6m9.min_denormal_exp == -39,
        "1/6/9/d constants");
  check(bf16.emin == -126 && bf16.emax == 127 && !bf16.min_denormal_exp,
        "1/8/7/n constants");
  check(encode16(1.0f, formats::kHalf) == 0x3C00, "encode16(1.0) == 0x3C00");
  const auto tie = roundfp(std::ldexp(1.0f, -25), formats::kHalf);
  check(tie.value.value() == 0.0f && tie.flags.has(RoundingFlag::UnderflowedToZero),
        "2^-25 ties to zero in 1/5/10/d");

  std::mt19937_64 rng(7);
  int mismatches = 0;
  const FpFormat fmts[] = {formats::kHalf, formats::kHalfFtz, formats::kE6M9,
                           formats::kE6M9Ftz, formats::kBfloat16};
  for (const auto& f : fmts) {
    for (int i = 0; i < 20000; ++i) {
      const float x = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
      const float a = round_value(x, f);
      const float b = reference::roundfp(x, f);
      if (std::bit_cast<std::uint32_t>(a) != std::bit_cast<std::uint32_t>(b)) ++mismatches;
    }
  }
  check(mismatches == 0, "roundfp vs exact oracle, 100000 random inputs");

  mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = rng() % 70;
    std::vector<float> w(n), x(n);
    for (std::size_t k = 0; k < n; ++k) {
      w[k] = round_value(uniform(rng, -2.0f, 2.0f), formats::kHalf);
      x[k] = round_value(uniform(rng, -2.0f, 2.0f), formats::kHalf);
    }
    const float a = fmac8_dot(w, x, formats::kHalf);
    const float b = reference::fmac8_dot(w, x, formats::kHalf);
    if (std::bit_cast<std::uint32_t>(a) != std::bit_cast<std::uint32_t>(b)) ++mismatches;
  }
  check(mismatches == 0, "fmac8_dot vs exact oracle, 200 random vectors");
  std::printf("%s\n", failures == 0 ? "selftest: all checks passed" : "selftest: FAILED");
  return failures == 0 ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fpemu: bit-exact emulation of parametric 16-bit floating-point formats"};
  app.require_subcommand(1);

  std::string fmt_spec;
  std::string value_text;
  bool hex = false;
  std::string mode_text = "fmac8";
  std::string vector_file;
  std::string config_path;
  std::string out_dir;
  std::string run_id;
  std::string runs_dir;
  std::string report_out;

  auto* info = app.add_subcommand("format-info", "Print the derived constants of a format");
  info->add_option("--fmt", fmt_spec, "Format spec 1/e/p/{d|n}")->required();

  auto* round = app.add_subcommand("round", "Round one value into a format");
  round->add_option("--fmt", fmt_spec, "Format spec 1/e/p/{d|n}")->required();
  round->add_option("--value", value_text, "Decimal, hex-float or 2^k")->required();
  round->add_flag("--hex", hex, "Show the rounded value as a hex-float first");

  auto* dotc = app.add_subcommand("dot", "Dot product of two vectors, checked against the exact oracle");
  dotc->add_option("--fmt", fmt_spec, "Format spec 1/e/p/{d|n}")->required();
  dotc->add_option("--mode", mode_text, "fmac8 or fmacs");
  dotc->add_option("--file", vector_file, "Vector file with 'w:' and 'x:' lines")->required();

  auto* trainc = app.add_subcommand("train", "Run a toy mixed-precision training job");
  trainc->add_option("--config", config_path, "key=value config file")->required();
  trainc->add_option("--out", out_dir, "Output directory (default runs/<run_id>)");
  trainc->add_option("--run-id", run_id, "Override run_id from the config");

  auto* reportc = app.add_subcommand("report", "Tabulate the summaries of several runs");
  reportc->add_option("--runs", runs_dir, "Directory of run output directories")->required();
  reportc->add_option("--out", report_out, "Also write the table to this file");

  auto* selftest = app.add_subcommand("selftest", "Run a quick built-in consistency check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*info) return cmd_format_info(fmt_spec);
    if (*round) return cmd_round(fmt_spec, value_text, hex);
    if (*dotc) return cmd_dot(fmt_spec, mode_text, vector_file);
    if (*trainc) return cmd_train(config_path, out_dir, run_id);
    if (*reportc) return cmd_report(runs_dir, report_out);
    if (*selftest) return cmd_selftest();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
