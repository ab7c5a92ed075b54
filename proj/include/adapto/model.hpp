#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "adapto/config.hpp"
#include "adapto/layers.hpp"
#include "adapto/tensor.hpp"

namespace adapto {

/// Pointwise -> BN -> ELU -> depthwise -> pointwise -> BN -> ELU.
struct Block2Params {
  ConvParams pw_a;
  BatchNormParams bn_a;
  ConvParams dw;
  ConvParams pw_b;
  BatchNormParams bn_b;
};

/// Enhanced residual unit: four channel-preserving k x k convs with Block-2
/// between the second and third.
struct EruParams {
  ConvParams conv1;
  BatchNormParams bn1;
  ConvParams conv2;
  BatchNormParams bn2;
  Block2Params block2;
  ConvParams conv3;
  BatchNormParams bn3;
  ConvParams conv4;
  BatchNormParams bn4;
};

/// Plain two-conv residual block, kept as the comparison baseline.
struct BaselineResidualParams {
  ConvParams conv1;
  BatchNormParams bn1;
  ConvParams conv2;
  BatchNormParams bn2;
};

/// Between encoder stages. Main path: optional 2x2 max-pool, optional 1x1
/// alignment conv, BN, ELU. Shortcut: GAP then the 1x1 conv `shortcut`,
/// broadcast-added onto the main path.
struct TransitionParams {
  bool pool = true;
  std::optional<ConvParams> align;
  BatchNormParams bn;
  ConvParams shortcut;
};

struct StageParams {
  std::size_t width = 0;
  std::size_t kernel = 3;
  std::vector<EruParams> units;
  double dropout_rate = 0.0;
  Tensor alpha1;
  Tensor alpha2;
};

struct ParamEntry {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

/// Parameter sets for every block of one configuration plus a registry
/// naming each tensor. Registry order is fixed for a given config.
class Model {
 public:
  Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  ModelConfig config;
  ConvParams stem;
  BatchNormParams stem_bn;
  std::vector<StageParams> stages;
  /// transitions[m] leads into stages[m + 1].
  std::vector<TransitionParams> transitions;
  ConvParams head;
  std::vector<ParamEntry> registry;

  [[nodiscard]] std::vector<Tensor> trainable_parameters() const;
  [[nodiscard]] const ParamEntry* find(const std::string& name) const;
  /// Number of trainable scalars.
  [[nodiscard]] std::size_t trainable_count() const;
};

/// Records the output shape of every named layer during forward.
using ShapeLog = std::map<std::string, Shape>;

struct ForwardOptions {
  Mode mode = Mode::eval;
  /// Seeds the train-mode dropout masks; each stage derives its own stream.
  std::uint64_t dropout_seed = 0;
  ShapeLog* shapes = nullptr;
  /// Receives each stage's output feature map.
  std::vector<Tensor>* stage_outputs = nullptr;
};

// Factories (He fan-in normal init for conv kernels, identity BN).
ConvParams make_conv(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t padding,
                     bool bias, std::mt19937_64& rng);
ConvParams make_depthwise(std::size_t channels, std::size_t k, std::mt19937_64& rng);
Block2Params make_block2(std::size_t in, std::size_t out, std::size_t k, std::mt19937_64& rng,
                         double bn_eps = 1e-5, double bn_momentum = 0.9);
/// The final BN's gamma starts at zero, so the unit is the identity at init.
EruParams make_eru(std::size_t channels, std::size_t k, std::mt19937_64& rng, double bn_eps = 1e-5,
                   double bn_momentum = 0.9);
BaselineResidualParams make_baseline_residual(std::size_t channels, std::size_t k, std::mt19937_64& rng,
                                              double bn_eps = 1e-5, double bn_momentum = 0.9);
TransitionParams make_transition(std::size_t in, std::size_t out, bool pool, std::mt19937_64& rng,
                                 double bn_eps = 1e-5, double bn_momentum = 0.9);

Tensor block2_forward(const Tensor& z, Block2Params& p, Mode mode);
/// The transformation path T(x) of the unit, without the identity term.
Tensor eru_transform(const Tensor& x, EruParams& p, Mode mode);
/// x + T(x).
Tensor eru_forward(const Tensor& x, EruParams& p, Mode mode);
Tensor baseline_residual_forward(const Tensor& x, BaselineResidualParams& p, Mode mode);

/// alpha1 * x_prev + alpha2 * x_prev2 + branch_out. An empty x_prev2 drops the
/// alpha2 term. Shapes must already agree.
Tensor encoder_fuse(const Tensor& x_prev, const std::optional<Tensor>& x_prev2, const Tensor& branch_out,
                    double alpha1, double alpha2);
/// Same with (1,1,1,1) weight tensors, differentiable in the weights.
Tensor encoder_fuse(const Tensor& x_prev, const std::optional<Tensor>& x_prev2, const Tensor& branch_out,
                    const Tensor& alpha1, const Tensor& alpha2);

Tensor stage_transition(const Tensor& x, TransitionParams& p, Mode mode);

/// Validates the config and initializes every parameter from config.seed.
Model build_model(const ModelConfig& config);

/// Logits shaped (N, num_classes, 1, 1).
Tensor forward(Model& model, const Tensor& batch, const ForwardOptions& options = {});
Tensor forward(Model& model, const Tensor& batch, Mode mode);

}  // namespace adapto
