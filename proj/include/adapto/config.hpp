#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace adapto {

/// How a stage's width relates to the width before it.
enum class Phase { hold, expansion, compression };

std::string to_string(Phase phase);
Phase phase_from_string(const std::string& name);

struct StageConfig {
  Phase phase = Phase::hold;
  std::size_t num_units = 1;
  std::size_t kernel = 3;
  /// Halve the resolution on entry (stage 0 must not).
  bool downsample = false;

  friend bool operator==(const StageConfig&, const StageConfig&) = default;
};

struct InputShape {
  std::size_t c = 3;
  std::size_t h = 32;
  std::size_t w = 32;

  friend bool operator==(const InputShape&, const InputShape&) = default;
};

struct ModelConfig {
  InputShape input_shape;
  std::size_t stem_width = 64;
  std::vector<StageConfig> stages;
  std::size_t num_classes = 10;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  bool alpha_learnable = false;
  double dropout_start = 0.3;
  double dropout_end = 0.5;
  std::uint64_t seed = 0;
  double gamma = 2.0;
  double delta = 0.5;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;
  /// Hardware limits on summed channel widths / kernel sizes; 0 means unlimited.
  std::size_t c_max = 0;
  std::size_t k_max = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Widths [f0, f1, ...]: expansion multiplies by gamma, compression by
/// delta, hold keeps the width. Throws ConfigError on a non-integral width
/// or a factor outside {1/2, 1, 2}.
std::vector<std::size_t> width_schedule(std::size_t f0, const std::vector<Phase>& phases, double gamma = 2.0,
                                        double delta = 0.5);

/// Channel width of every stage (the schedule without the leading f0).
std::vector<std::size_t> stage_widths(const ModelConfig& config);

/// Spatial extent (H, W) at which every stage runs.
std::vector<std::pair<std::size_t, std::size_t>> stage_resolutions(const ModelConfig& config);

/// Throws ConfigError naming the first violated invariant.
void validate(const ModelConfig& config);

std::string to_json(const ModelConfig& config);
/// Parses and validates.
ModelConfig config_from_json(const std::string& text);

ModelConfig load_config(const std::string& path);
void save_config(const ModelConfig& config, const std::string& path);

/// Named presets: "cifar-32", "cifar-64", "mini".
ModelConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// The 32x32 preset extended by one encoder stage per octave above 32
/// (64 -> +1 stage, 128 -> +2).
ModelConfig preset_for_resolution(std::size_t resolution);

}  // namespace adapto
