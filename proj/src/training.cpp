// Copyright 2026 The fpemu Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fpemu/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace fpemu {

namespace {

constexpr std::size_t kImageSide = 8;

// Irwin-Hall approximation of a standard normal; avoids libm so datasets
// are identical everywhere.
float gaussian(std::mt19937_64& rng) {
  float s = 0.0f;
  for (int i = 0; i < 12; ++i) s += uniform(rng, 0.0f, 1.0f);
  return s - 6.0f;
}

Dataset make_regression(std::uint64_t seed) {
  constexpr std::size_t kSamples = 512;
  constexpr std::size_t kInputs = 8;
  constexpr float kTeacherScale = 0.05f;
  constexpr float kNoise = 2e-3f;
  std::mt19937_64 rng(seed ^ 0x5EED0001ull);
  std::vector<float> teacher(kInputs);
  for (float& w : teacher) w = uniform(rng, -1.0f, 1.0f);

  Dataset d;
  d.task = Task::Regression;
  d.inputs = Tensor::matrix(kSamples, kInputs);
  d.targets = Tensor::matrix(kSamples, 1);
  for (std::size_t n = 0; n < kSamples; ++n) {
    float t = 0.0f;
    for (std::size_t i = 0; i < kInputs; ++i) {
      const float x = uniform(rng, -1.0f, 1.0f);
      d.inputs.at(n, i) = x;
      t += teacher[i] * x;
    }
    d.targets.at(n, 0) = kTeacherScale * t + kNoise * gaussian(rng);
  }
  return d;
}

Dataset make_blobs(std::uint64_t seed) {
  constexpr std::size_t kSamples = 600;
  constexpr int kClasses = 3;
  constexpr float kSpread = 0.6f;
  // centres on the unit circle at 0, 120 and 240 degrees
  constexpr float kCentres[kClasses][2] = {
      {1.0f, 0.0f}, {-0.5f, 0.8660254f}, {-0.5f, -0.8660254f}};
  std::mt19937_64 rng(seed ^ 0x5EED0002ull);
  Dataset d;
  d.task = Task::Mlp;
  d.classes = kClasses;
  d.inputs = Tensor::matrix(kSamples, 2);
  d.labels.resize(kSamples);
  for (std::size_t n = 0; n < kSamples; ++n) {
    const int c = static_cast<int>(n % kClasses);
    d.labels[n] = c;
    d.inputs.at(n, 0) = kCentres[c][0] + kSpread * gaussian(rng);
    d.inputs.at(n, 1) = kCentres[c][1] + kSpread * gaussian(rng);
  }
  return d;
}

Dataset make_images(std::uint64_t seed) {
  constexpr std::size_t kSamples = 512;
  constexpr int kClasses = 4;
  constexpr float kIntensity = 0.6f;
  constexpr float kNoise = 0.45f;
  const std::size_t side = kImageSide;
  std::mt19937_64 rng(seed ^ 0x5EED0003ull);
  Dataset d;
  d.task = Task::Cnn;
  d.classes = kClasses;
  d.inputs = Tensor({kSamples, 1, side, side});
  d.labels.resize(kSamples);
  for (std::size_t n = 0; n < kSamples; ++n) {
    const int c = static_cast<int>(n % kClasses);
    d.labels[n] = c;
    const auto pos = static_cast<std::size_t>(rng() % side);
    float* img = d.inputs.data().data() + n * side * side;
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        bool on = false;
        switch (c) {
          case 0: on = y == pos; break;              // horizontal bar
          case 1: on = x == pos; break;              // vertical bar
          case 2: on = x == y; break;                // diagonal
          default: on = x + y == side - 1; break;    // anti-diagonal
        }
        img[y * side + x] = (on ? kIntensity : 0.0f) + kNoise * gaussian(rng);
      }
    }
  }
  return d;
}

float parse_float(std::string_view key, std::string_view text) {
  std::string s(text);
  char* end = nullptr;
  const float v = std::strtof(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ConfigError("config: '" + std::string(key) + "' expects a number, got '" + s + "'");
  }
  return v;
}

template <typename Int>
Int parse_integer(std::string_view key, std::string_view text) {
  Int v{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ConfigError("config: '" + std::string(key) + "' expects an integer, got '" +
                      std::string(text) + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "on" || text == "true" || text == "1" || text == "yes") return true;
  if (text == "off" || text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config: '" + std::string(key) + "' expects on/off, got '" +
                    std::string(text) + "'");
}

// "2^k" or a plain power of two; returns k.
int parse_pow2(std::string_view key, std::string_view text) {
  if (text.starts_with("2^")) return parse_integer<int>(key, text.substr(2));
  const float v = parse_float(key, text);
  int exp = 0;
  const float frac = std::frexp(v, &exp);
  if (!(v > 0.0f) || frac != 0.5f) {
    throw ConfigError("config: '" + std::string(key) + "' must be a power of two");
  }
  return exp - 1;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string float_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string_view to_string(Task task) noexcept {
  switch (task) {
    case Task::Regression: return "regression";
    case Task::Mlp: return "mlp";
    case Task::Cnn: return "cnn";
  }
  return "?";
}

Task parse_task(std::string_view text) {
  if (text == "regression") return Task::Regression;
  if (text == "mlp") return Task::Mlp;
  if (text == "cnn") return Task::Cnn;
  throw ConfigError("unknown task '" + std::string(text) +
                    "': expected regression|mlp|cnn");
}

std::string_view to_string(Outcome outcome) noexcept {
  switch (outcome) {
    case Outcome::Converged: return "converged";
    case Outcome::Degraded: return "degraded";
    case Outcome::Diverged: return "diverged";
  }
  return "?";
}

Outcome parse_outcome(std::string_view text) {
  if (text == "converged") return Outcome::Converged;
  if (text == "degraded") return Outcome::Degraded;
  if (text == "diverged") return Outcome::Diverged;
  throw ConfigError("unknown outcome '" + std::string(text) + "'");
}

Tensor Dataset::batch_inputs(std::span<const std::size_t> idx) const {
  const std::size_t row = inputs.size() / size();
  std::vector<std::size_t> shape = inputs.shape();
  shape[0] = idx.size();
  Tensor out(shape);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    std::copy_n(inputs.data().begin() + static_cast<std::ptrdiff_t>(idx[b] * row),
                row, out.data().begin() + static_cast<std::ptrdiff_t>(b * row));
  }
  return out;
}

Dataset make_dataset(Task task, std::uint64_t seed) {
  switch (task) {
    case Task::Regression: return make_regression(seed);
    case Task::Mlp: return make_blobs(seed);
    case Task::Cnn: return make_images(seed);
  }
  throw ConfigError("unknown task");
}

Sequential make_model(Task task, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x1417ull);
  Sequential m;
  switch (task) {
    case Task::Regression:
      m.add<Linear>("fc1", 8, 16, rng);
      m.add<Relu>("relu1");
      m.add<Linear>("fc2", 16, 16, rng);
      m.add<Relu>("relu2");
      m.add<Linear>("fc3", 16, 1, rng);
      break;
    case Task::Mlp:
      m.add<Linear>("fc1", 2, 32, rng);
      m.add<Relu>("relu1");
      m.add<Linear>("fc2", 32, 32, rng);
      m.add<Relu>("relu2");
      m.add<Linear>("fc3", 32, 3, rng);
      break;
    case Task::Cnn: {
      constexpr std::size_t kChannels = 4;
      constexpr std::size_t kOut = kImageSide - 2;
      m.add<Conv2d>("conv1", 1, kChannels, 3, rng);
      m.add<Relu>("relu1");
      m.add<Flatten>("flatten");
      m.add<Linear>("fc1", kChannels * kOut * kOut, 4, rng);
      break;
    }
  }
  return m;
}

LossResult compute_loss(const Dataset& data, const Tensor& output,
                        std::span<const std::size_t> idx) {
  LossResult r;
  r.grad = Tensor(output.shape());
  const std::size_t batch = idx.size();
  if (data.task == Task::Regression) {
    const float n = static_cast<float>(output.size());
    float sum = 0.0f;
    for (std::size_t b = 0; b < batch; ++b) {
      const float diff = output.at(b, 0) - data.targets.at(idx[b], 0);
      sum += diff * diff;
      r.grad.at(b, 0) = 2.0f * diff / n;
    }
    r.loss = sum / n;
    return r;
  }
  // softmax cross-entropy
  const std::size_t classes = output.cols();
  const float inv_batch = 1.0f / static_cast<float>(batch);
  float sum = 0.0f;
  for (std::size_t b = 0; b < batch; ++b) {
    float top = output.at(b, 0);
    for (std::size_t c = 1; c < classes; ++c) top = std::max(top, output.at(b, c));
    float z = 0.0f;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(output.at(b, c) - top);
    const float log_z = std::log(z);
    const auto label = static_cast<std::size_t>(data.labels[idx[b]]);
    sum += -(output.at(b, label) - top - log_z);
    for (std::size_t c = 0; c < classes; ++c) {
      const float prob = std::exp(output.at(b, c) - top - log_z);
      r.grad.at(b, c) = (prob - (c == label ? 1.0f : 0.0f)) * inv_batch;
    }
  }
  r.loss = sum * inv_batch;
  return r;
}

// ---------------------------------------------------------------- config

TrainConfig TrainConfig::parse(std::string_view text) {
  TrainConfig c;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "run_id") {
      c.run_id = std::string(value);
    } else if (key == "task") {
      c.task = parse_task(value);
    } else if (key == "format") {
      if (value == "none") {
        c.format.reset();
      } else {
        try {
          c.format = FpFormat::parse(value);
        } catch (const FormatError& e) {
          throw ConfigError(std::string("config: ") + e.what());
        }
      }
    } else if (key == "mode") {
      try {
        c.mode = AccumMode::parse(value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    } else if (key == "dls") {
      c.dls = parse_bool(key, value);
    } else if (key == "dls_init_scale") {
      c.scaler.init_scale_log2 = parse_pow2(key, value);
    } else if (key == "dls_min_scale") {
      c.scaler.min_scale_log2 = parse_pow2(key, value);
    } else if (key == "dls_max_scale") {
      c.scaler.max_scale_log2 = parse_pow2(key, value);
    } else if (key == "dls_growth_interval") {
      c.scaler.growth_interval = parse_integer<std::int64_t>(key, value);
    } else if (key == "seed") {
      c.seed = parse_integer<std::uint64_t>(key, value);
    } else if (key == "steps") {
      c.steps = parse_integer<std::int64_t>(key, value);
    } else if (key == "batch_size") {
      c.batch_size = parse_integer<std::size_t>(key, value);
    } else if (key == "lr") {
      c.learning_rate = parse_float(key, value);
    } else if (key == "momentum") {
      c.momentum = parse_float(key, value);
    } else if (key == "converge_loss") {
      c.converge_loss = parse_float(key, value);
    } else if (key == "diverge_patience") {
      c.diverge_patience = parse_integer<std::int64_t>(key, value);
    } else if (key == "telemetry") {
      c.telemetry = parse_bool(key, value);
    } else if (key == "telemetry_every") {
      c.telemetry_every = parse_integer<std::int64_t>(key, value);
    } else if (key == "threads") {
      c.threads = parse_integer<unsigned>(key, value);
    } else {
      throw ConfigError("config: unknown key '" + std::string(key) + "'");
    }
  }
  if (c.steps < 0) throw ConfigError("config: steps must be >= 0");
  if (c.batch_size == 0) throw ConfigError("config: batch_size must be >= 1");
  if (c.telemetry_every < 1) throw ConfigError("config: telemetry_every must be >= 1");
  if (c.diverge_patience < 1) throw ConfigError("config: diverge_patience must be >= 1");
  if (c.threads == 0) throw ConfigError("config: threads must be >= 1");
  try {
    LossScaler check(c.scaler);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string TrainConfig::format_spec() const {
  return format ? format->to_string() : "none";
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  out << "run_id = " << run_id << "\n"
      << "task = " << to_string(task) << "\n"
      << "format = " << format_spec() << "\n"
      << "mode = " << mode.to_string() << "\n"
      << "dls = " << (dls ? "on" : "off") << "\n"
      << "dls_init_scale = 2^" << scaler.init_scale_log2 << "\n"
      << "dls_min_scale = 2^" << scaler.min_scale_log2 << "\n"
      << "dls_max_scale = 2^" << scaler.max_scale_log2 << "\n"
      << "dls_growth_interval = " << scaler.growth_interval << "\n"
      << "seed = " << seed << "\n"
      << "steps = " << steps << "\n"
      << "batch_size = " << batch_size << "\n"
      << "lr = " << float_text(learning_rate) << "\n"
      << "momentum = " << float_text(momentum) << "\n"
      << "converge_loss = " << float_text(converge_loss) << "\n"
      << "diverge_patience = " << diverge_patience << "\n"
      << "telemetry = " << (telemetry ? "on" : "off") << "\n"
      << "telemetry_every = " << telemetry_every << "\n"
      << "threads = " << threads << "\n";
  return out.str();
}

// ---------------------------------------------------------------- training

float evaluate(Sequential& model, const Dataset& data, const QuantSpec& quant,
               std::size_t batch_size) {
  const PassContext ctx{&quant, nullptr, 0};
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor y = model.forward(data.batch_inputs(idx), ctx);
    total += static_cast<double>(compute_loss(data, y, idx).loss) *
             static_cast<double>(idx.size());
  }
  return static_cast<float>(total / static_cast<double>(data.size()));
}

TrainResult train(const TrainConfig& config) {
  const Dataset data = make_dataset(config.task, config.seed);
  TrainResult result;
  result.model = make_model(config.task, config.seed);
  Sequential& model = result.model;
  const auto params = model.params();

  const QuantSpec quant{config.format, config.mode, config.threads};
  RunLog log(RunInfo{config.run_id, config.format_spec(), config.dls,
                     config.mode.to_string()});
  LossScaler scaler(config.scaler);

  // Fisher-Yates with our own draws: std::shuffle is not portable.
  std::mt19937_64 order_rng(config.seed ^ 0x0DE5ull);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = data.size();
  const std::size_t batch = std::min(config.batch_size, data.size());

  std::int64_t bad_steps = 0;
  bool diverged = false;
  std::vector<std::size_t> idx(batch);

  for (std::int64_t step = 0; step < config.steps; ++step) {
    if (cursor + batch > data.size()) {
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[order_rng() % (i + 1)]);
      }
      cursor = 0;
    }
    std::copy_n(order.begin() + static_cast<std::ptrdiff_t>(cursor), batch, idx.begin());
    cursor += batch;

    const bool observe = config.telemetry && step % config.telemetry_every == 0;
    const PassContext ctx{&quant, observe ? &log : nullptr, step};

    const Tensor y = model.forward(data.batch_inputs(idx), ctx);
    LossResult loss = compute_loss(data, y, idx);
    const float scale = config.dls ? scaler.scale() : 1.0f;
    if (config.dls) {
      for (float& g : loss.grad.data()) g = std::ldexp(g, scaler.scale_log2());
    }
    model.backward(loss.grad, ctx);

    bool skipped = false;
    if (config.dls) {
      skipped = scaler.step(params) == LossScaler::Decision::SkipStep;
    }
    if (!skipped) {
      for (Param* p : params) {
        auto w = p->value.data();
        auto g = p->grad.data();
        auto v = p->velocity.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = config.momentum * v[i] + g[i];
          w[i] = w[i] - config.learning_rate * v[i];
        }
      }
    }
    result.curve.push_back({step, loss.loss, scale, skipped});
    result.steps_run = step + 1;

    if (!skipped && !std::isfinite(loss.loss)) {
      if (++bad_steps >= config.diverge_patience) {
        diverged = true;
        break;
      }
    } else if (!skipped) {
      bad_steps = 0;
    }
  }

  result.final_loss = evaluate(model, data, quant, batch);
  if (diverged || !std::isfinite(result.final_loss)) {
    result.outcome = Outcome::Diverged;
  } else if (result.final_loss <= config.converge_loss) {
    result.outcome = Outcome::Converged;
  } else {
    result.outcome = Outcome::Degraded;
  }
  if (!log.empty()) result.summary = log.summarize();
  return result;
}

std::string loss_curve_csv(const std::vector<LossRow>& curve) {
  std::string out = "step,loss,scale,skipped\n";
  for (const auto& r : curve) {
    out += std::to_string(r.step);
    out += ',';
    out += float_text(r.loss);
    out += ',';
    out += float_text(r.scale);
    out += ',';
    out += r.skipped ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::string run_report_json(const TrainConfig& config, const TrainResult& result) {
  nlohmann::ordered_json j;
  if (result.summary) {
    j = nlohmann::ordered_json::parse(to_json(*result.summary));
  } else {
    j["run_id"] = config.run_id;
    j["format"] = config.format_spec();
    j["dls"] = config.dls;
    j["accum_mode"] = config.mode.to_string();
    j["global_max"] = 0.0;
    j["per_tensor"] = nlohmann::ordered_json::array();
    j["records"] = nlohmann::ordered_json::array();
  }
  j.erase("records");  // full records live in telemetry.csv/json
  j["task"] = to_string(config.task);
  // NaN is not valid JSON; non-finite losses are written as null.
  if (std::isfinite(result.final_loss)) {
    j["final_loss"] = result.final_loss;
  } else {
    j["final_loss"] = nullptr;
  }
  j["outcome"] = to_string(result.outcome);
  j["steps_run"] = result.steps_run;
  return j.dump(2) + "\n";
}

RunRow parse_run_report(std::string_view json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    RunRow row;
    row.run_id = j.at("run_id").get<std::string>();
    row.format = j.at("format").get<std::string>();
    row.dls = j.at("dls").get<bool>();
    row.accum_mode = j.at("accum_mode").get<std::string>();
    row.global_max = j.at("global_max").get<double>();
    const auto& loss = j.at("final_loss");
    row.final_loss = loss.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                    : loss.get<double>();
    row.outcome = j.at("outcome").get<std::string>();
    static_cast<void>(parse_outcome(row.outcome));
    return row;
  } catch (const nlohmann::json::exception& e) {
    throw TelemetryError(std::string("run report: ") + e.what());
  } catch (const ConfigError& e) {
    throw TelemetryError(std::string("run report: ") + e.what());
  }
}

std::string format_run_table(const std::vector<RunRow>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %-10s %-4s %-7s %18s %14s  %s\n", "run",
                "format", "DLS", "accum", "max denormal frac", "final loss",
                "outcome");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-28s %-10s %-4s %-7s %18.6f %14.6g  %s\n",
                  r.run_id.c_str(), r.format.c_str(), r.dls ? "yes" : "no",
                  r.accum_mode.c_str(), r.global_max, r.final_loss,
                  r.outcome.c_str());
    out += buf;
  }
  return out;
}

void write_run_outputs(const std::filesystem::path& dir, const TrainConfig& config,
                       const TrainResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw TelemetryError("cannot create '" + dir.string() + "': " + ec.message());
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw TelemetryError("cannot write '" + (dir / name).string() + "'");
    out << content;
    out.flush();
    if (!out) throw TelemetryError("write to '" + (dir / name).string() + "' failed");
  };
  write("config.txt", config.to_text());
  write("loss.csv", loss_curve_csv(result.curve));
  const RunSummary empty{config.run_id, config.format_spec(), config.dls,
                         config.mode.to_string(), {}, 0.0, {}};
  const RunSummary& summary = result.summary ? *result.summary : empty;
  write("telemetry.csv", to_csv(summary));
  write("telemetry.json", to_json(summary));
  write("summary.json", run_report_json(config, result));
}

}  // namespace fpemu
