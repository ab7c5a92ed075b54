#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "adapto/autodiff.hpp"
#include "adapto/data.hpp"
#include "adapto/model.hpp"

namespace adapto {

struct TrainConfig {
  double lr0 = 0.175;
  double decay_factor = 0.99;
  double decay_period_epochs = 12.4;
  bool staircase = false;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double momentum = 0.9;
  double weight_decay = 0.0;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
  std::uint64_t seed = 0;
  std::string augmentation_policy = "none";
};

/// Throws ConfigError on lr0 <= 0, decay_factor outside (0, 1], non-positive
/// decay period, zero batch size or momentum outside [0, 1).
void validate(const TrainConfig& cfg);

struct MetricsRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  double macro_f1 = 0.0;
  double lr = 0.0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  double macro_f1 = 0.0;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

/// One-vs-rest precision/recall/F1 per class. A ratio with a zero
/// denominator is reported as 0; F1 is 0 whenever P + R = 0.
EvalResult classification_metrics(std::span<const int> predicted, std::span<const int> labels,
                                  std::size_t num_classes);

/// Eval-mode forward over the whole dataset, argmax predictions.
EvalResult evaluate(Model& model, const Dataset& dataset, std::size_t batch_size = 64);

/// Momentum buffers keyed by parameter identity.
struct SgdState {
  std::unordered_map<const detail::TensorImpl*, std::vector<double>> velocity;
};

/// v <- momentum * v + g;  p <- p - lr * v. Every parameter must have a gradient.
void sgd_step(std::span<Tensor> params, const GradientMap& grads, double lr, double momentum, SgdState& state,
              double weight_decay = 0.0, double clip_norm = 0.0);

/// Seeded mini-batch SGD; one record per epoch. Deterministic given cfg.seed.
std::vector<MetricsRecord> train(Model& model, const Dataset& train_set, const Dataset& val_set,
                                 const TrainConfig& cfg);

/// Header: epoch,train_loss,train_acc,val_acc,lr,macro_f1
std::string metrics_csv(const std::vector<MetricsRecord>& records);
void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path);

}  // namespace adapto
