#include "adapto/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "adapto/errors.hpp"
#include "json.hpp"

namespace adapto {

using nlohmann::json;

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::hold: return "hold";
    case Phase::expansion: return "expansion";
    case Phase::compression: return "compression";
  }
  return "hold";
}

Phase phase_from_string(const std::string& name) {
  if (name == "hold") return Phase::hold;
  if (name == "expansion" || name == "expand") return Phase::expansion;
  if (name == "compression" || name == "compress") return Phase::compression;
  throw ConfigError("unknown phase '" + name + "' (expected hold, expansion or compression)");
}

namespace {

bool in_factor_set(double f) { return f == 0.5 || f == 1.0 || f == 2.0; }

}  // namespace

std::vector<std::size_t> width_schedule(std::size_t f0, const std::vector<Phase>& phases, double gamma,
                                        double delta) {
  if (f0 < 1) throw ConfigError("width schedule: f0 must be at least 1");
  if (!in_factor_set(gamma) || gamma < 1.0) {
    throw ConfigError("width schedule: expansion factor gamma must be 1 or 2 (width factors lie in {1/2, 1, 2})");
  }
  if (!in_factor_set(delta) || delta > 1.0) {
    throw ConfigError(
        "width schedule: compression factor delta must be 1/2 or 1 (width factors lie in {1/2, 1, 2})");
  }
  std::vector<std::size_t> widths{f0};
  for (Phase phase : phases) {
    const double factor = phase == Phase::expansion ? gamma : phase == Phase::compression ? delta : 1.0;
    const double next = factor * static_cast<double>(widths.back());
    if (next < 1.0 || std::floor(next) != next) {
      std::ostringstream os;
      os << "width schedule: width " << next << " after stage " << widths.size() - 1
         << " is not a positive integer (widths must be integral)";
      throw ConfigError(os.str());
    }
    widths.push_back(static_cast<std::size_t>(next));
  }
  return widths;
}

std::vector<std::size_t> stage_widths(const ModelConfig& config) {
  std::vector<Phase> phases;
  for (const auto& s : config.stages) phases.push_back(s.phase);
  auto widths = width_schedule(config.stem_width, phases, config.gamma, config.delta);
  widths.erase(widths.begin());
  return widths;
}

std::vector<std::pair<std::size_t, std::size_t>> stage_resolutions(const ModelConfig& config) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t h = config.input_shape.h, w = config.input_shape.w;
  for (const auto& s : config.stages) {
    if (s.downsample) {
      h /= 2;
      w /= 2;
    }
    out.emplace_back(h, w);
  }
  return out;
}

void validate(const ModelConfig& config) {
  const auto& in = config.input_shape;
  if (in.c < 1 || in.h < 1 || in.w < 1) throw ConfigError("input_shape extents must be positive");
  if (config.stem_width < 1) throw ConfigError("stem_width must be positive");
  if (config.num_classes < 1) throw ConfigError("num_classes must be positive");
  if (!(config.dropout_start >= 0.0 && config.dropout_start < 1.0 && config.dropout_end >= 0.0 &&
        config.dropout_end < 1.0)) {
    throw ConfigError("dropout_start and dropout_end must lie in [0, 1)");
  }
  if (config.dropout_start > config.dropout_end) throw ConfigError("dropout_start must not exceed dropout_end");
  if (!std::isfinite(config.alpha1) || !std::isfinite(config.alpha2)) {
    throw ConfigError("alpha1 and alpha2 must be finite");
  }
  if (!(config.bn_eps > 0.0)) throw ConfigError("bn_eps must be positive");
  if (!(config.bn_momentum > 0.0 && config.bn_momentum < 1.0)) throw ConfigError("bn_momentum must lie in (0, 1)");

  for (std::size_t m = 0; m < config.stages.size(); ++m) {
    const auto& s = config.stages[m];
    const std::string where = "stage " + std::to_string(m) + ": ";
    if (s.num_units < 1) throw ConfigError(where + "num_units must be at least 1");
    if (s.kernel != 3 && s.kernel != 5 && s.kernel != 7) {
      throw ConfigError(where + "kernel must be one of 3, 5, 7");
    }
    if (m == 0 && s.phase != Phase::hold) {
      throw ConfigError(where + "the first stage runs at the stem width and must use phase 'hold'");
    }
    if (m == 0 && s.downsample) throw ConfigError(where + "the first stage cannot downsample");
  }
  stage_widths(config);

  std::size_t h = in.h, w = in.w;
  for (std::size_t m = 0; m < config.stages.size(); ++m) {
    if (!config.stages[m].downsample) continue;
    if (h < 2 || w < 2) {
      throw ConfigError("stage " + std::to_string(m) + ": input " + std::to_string(h) + "x" + std::to_string(w) +
                        " too small to downsample");
    }
    h /= 2;
    w /= 2;
  }
}

std::string to_json(const ModelConfig& c) {
  json stages = json::array();
  for (const auto& s : c.stages) {
    stages.push_back({{"phase", to_string(s.phase)},
                      {"num_units", s.num_units},
                      {"kernel", s.kernel},
                      {"downsample", s.downsample}});
  }
  json j = {{"input_shape", {c.input_shape.c, c.input_shape.h, c.input_shape.w}},
            {"stem_width", c.stem_width},
            {"stages", stages},
            {"num_classes", c.num_classes},
            {"alpha1", c.alpha1},
            {"alpha2", c.alpha2},
            {"alpha_learnable", c.alpha_learnable},
            {"dropout_start", c.dropout_start},
            {"dropout_end", c.dropout_end},
            {"seed", c.seed},
            {"gamma", c.gamma},
            {"delta", c.delta},
            {"bn_eps", c.bn_eps},
            {"bn_momentum", c.bn_momentum},
            {"c_max", c.c_max},
            {"k_max", c.k_max}};
  return j.dump(2) + "\n";
}

namespace {

std::size_t integral(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)) return v.get<std::size_t>();
  throw ConfigError(key + " = " + v.dump() + " is not a non-negative integer (widths, counts and sizes must be integral)");
}

std::size_t integral_or(const json& j, const std::string& key, std::size_t fallback) {
  return j.contains(key) ? integral(j, key) : fallback;
}

}  // namespace

ModelConfig config_from_json(const std::string& text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    const json& shape = j.at("input_shape");
    if (!shape.is_array() || shape.size() != 3) throw ConfigError("input_shape must list (C, H, W)");
    const json dims = {{"C", shape[0]}, {"H", shape[1]}, {"W", shape[2]}};
    c.input_shape = {integral(dims, "C"), integral(dims, "H"), integral(dims, "W")};
    c.stem_width = integral(j, "stem_width");
    c.num_classes = integral(j, "num_classes");
    for (const auto& s : j.at("stages")) {
      StageConfig stage;
      stage.phase = phase_from_string(s.at("phase").get<std::string>());
      stage.num_units = integral(s, "num_units");
      stage.kernel = integral(s, "kernel");
      stage.downsample = s.at("downsample").get<bool>();
      c.stages.push_back(stage);
    }
    c.alpha1 = j.value("alpha1", c.alpha1);
    c.alpha2 = j.value("alpha2", c.alpha2);
    c.alpha_learnable = j.value("alpha_learnable", c.alpha_learnable);
    c.dropout_start = j.value("dropout_start", c.dropout_start);
    c.dropout_end = j.value("dropout_end", c.dropout_end);
    c.seed = j.value("seed", c.seed);
    c.gamma = j.value("gamma", c.gamma);
    c.delta = j.value("delta", c.delta);
    c.bn_eps = j.value("bn_eps", c.bn_eps);
    c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
    c.c_max = integral_or(j, "c_max", c.c_max);
    c.k_max = integral_or(j, "k_max", c.k_max);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  validate(c);
  return c;
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json(buffer.str());
}

void save_config(const ModelConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path);
  out << to_json(config);
}

namespace {

std::size_t kernel_for_resolution(std::size_t resolution) { return resolution >= 16 ? 3 : 5; }

}  // namespace

ModelConfig preset_for_resolution(std::size_t resolution) {
  if (resolution != 32 && resolution != 64 && resolution != 128) {
    throw ConfigError("resolution presets exist for 32, 64 and 128, got " + std::to_string(resolution));
  }
  ModelConfig c;
  c.input_shape = {3, resolution, resolution};
  c.stem_width = 80;
  c.num_classes = 10;

  std::vector<Phase> phases{Phase::hold, Phase::expansion, Phase::compression, Phase::expansion};
  std::vector<std::size_t> units{6, 2, 1, 1};
  for (std::size_t r = 64; r <= resolution; r *= 2) {
    phases.push_back(phases.back() == Phase::expansion ? Phase::compression : Phase::expansion);
    units.push_back(1);
  }
  std::size_t res = resolution;
  for (std::size_t m = 0; m < phases.size(); ++m) {
    if (m > 0) res /= 2;
    c.stages.push_back({phases[m], units[m], kernel_for_resolution(res), m > 0});
  }
  return c;
}

ModelConfig preset(const std::string& name) {
  if (name == "cifar-32") return preset_for_resolution(32);
  if (name == "cifar-64") return preset_for_resolution(64);
  if (name == "mini") {
    ModelConfig c;
    c.input_shape = {3, 16, 16};
    c.stem_width = 8;
    c.num_classes = 2;
    c.stages = {{Phase::hold, 1, 3, false}, {Phase::expansion, 1, 3, true}};
    return c;
  }
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset '" + name + "' (available: " + known + ")");
}

std::vector<std::string> preset_names() { return {"cifar-32", "cifar-64", "mini"}; }

}  // namespace adapto
