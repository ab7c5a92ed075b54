#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "adapto/config.hpp"
#include "adapto/model.hpp"

namespace adapto {

// Counting convention: 1 multiply-accumulate = 2 FLOPs. Bias adds, batch
// norm, ELU, pooling and additions are counted per layer as well. Counts
// are per input sample.

/// 2*h*w*c^2*k^2: the per-unit figure of the ERU cost model (the MACs of a
/// c->c k x k conv pair, or the FLOPs of one such conv).
std::uint64_t eru_flops(std::uint64_t h, std::uint64_t w, std::uint64_t c, std::uint64_t k);
/// h*w*c*k^2: MACs of a depthwise k x k conv over c channels.
std::uint64_t dwconv_flops(std::uint64_t h, std::uint64_t w, std::uint64_t c, std::uint64_t k);

struct LayerCost {
  std::string name;
  std::string kind;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;  // convolutions only
  std::uint64_t flops = 0;
  Shape output_shape;
};

/// One encoder unit: the closed-form figure next to the exact sum of its layers.
struct UnitCost {
  std::string name;
  std::uint64_t h = 0, w = 0, c = 0, k = 0;
  std::uint64_t formula_flops = 0;
  std::uint64_t exact_flops = 0;
  std::uint64_t depthwise_macs = 0;
  std::uint64_t depthwise_formula = 0;
};

struct ConstraintResult {
  std::string id;
  std::uint64_t bound = 0;
  std::uint64_t observed = 0;
  bool pass = false;
};

inline constexpr std::uint64_t kUnbounded = std::numeric_limits<std::uint64_t>::max();

struct CostReport {
  std::vector<LayerCost> per_layer;
  std::uint64_t total_params = 0;
  std::uint64_t total_flops = 0;
  std::uint64_t conv_macs = 0;
  /// 2 * conv_macs.
  std::uint64_t conv_flops = 0;
  std::vector<UnitCost> units;
  /// Sum of the per-unit closed-form figures over all stages and units.
  std::uint64_t formula_total_flops = 0;
  std::vector<ConstraintResult> constraints;
};

/// Static analysis of the topology implied by `config` (no tensors needed).
CostReport analyze(const ModelConfig& config, std::uint64_t c_max = kUnbounded, std::uint64_t k_max = kUnbounded);
CostReport analyze(const Model& model, std::uint64_t c_max = kUnbounded, std::uint64_t k_max = kUnbounded);

std::uint64_t total_flops(const Model& model);
/// Trainable elements in the model's registry (running statistics excluded).
std::uint64_t param_count(const Model& model);

/// For every unit index n: sum over stages of that unit's width <= c_max.
/// For every stage m: sum of its unit kernel sizes <= k_max.
std::vector<ConstraintResult> check_constraints(const ModelConfig& config, std::uint64_t c_max, std::uint64_t k_max);
std::vector<ConstraintResult> check_constraints(const Model& model, std::uint64_t c_max, std::uint64_t k_max);

/// Cost of the plain two-conv residual block at (h, w, c, k), for comparison.
CostReport analyze_baseline_residual(std::uint64_t h, std::uint64_t w, std::uint64_t c, std::uint64_t k);

struct BaselineRow {
  std::string model;
  double gflops = 0.0;
  double mparams = 0.0;
  std::string remark;
  bool published = false;
};

/// ResNet-18 and MobileNetV2 as published constants, then the model's computed row.
std::vector<BaselineRow> compare_baselines(const Model& model);

std::string format_report(const CostReport& report, const std::vector<BaselineRow>& baselines);
/// Columns: name,params,flops,out_shape
std::string report_csv(const CostReport& report);

}  // namespace adapto
