#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "adapto/tensor.hpp"

namespace adapto {

enum class Mode { train, eval };

/// Convolution weights. `weight` is (C_out, C_in, k, k), or (C, 1, k, k) for
/// depthwise use; `bias`, when present, is (1, C_out, 1, 1).
struct ConvParams {
  Tensor weight;
  std::optional<Tensor> bias;
  std::size_t stride = 1;
  std::size_t padding = 0;

  [[nodiscard]] std::size_t kernel() const { return weight.shape().h; }
  [[nodiscard]] std::size_t out_channels() const { return weight.shape().n; }
  [[nodiscard]] std::size_t in_channels() const { return weight.shape().c; }
};

/// Per-channel affine terms and running statistics, each shaped (1, C, 1, 1).
struct BatchNormParams {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double eps = 1e-5;
  double momentum = 0.9;

  [[nodiscard]] std::size_t channels() const { return gamma.shape().c; }
  static BatchNormParams identity(std::size_t channels, double eps = 1e-5, double momentum = 0.9);
};

/// Cross-correlation with zero padding. Runs im2col + GEMM, or the serial
/// reference kernel while a reference::ReferenceScope is active.
Tensor conv2d(const Tensor& x, const ConvParams& p);

/// Channel c of the output convolves channel c of the input only.
Tensor depthwise_conv2d(const Tensor& x, const ConvParams& p);

/// 1x1 conv2d; rejects any other kernel size, stride or padding.
Tensor pointwise_conv2d(const Tensor& x, const ConvParams& p);

/// Train mode normalizes with batch statistics over (N,H,W) and folds them
/// into the running statistics; eval mode uses the running statistics.
Tensor batch_norm(const Tensor& x, BatchNormParams& p, Mode mode);

Tensor elu(const Tensor& x, double alpha = 1.0);

/// Window max; the gradient goes to the first maximal element in row-major order.
Tensor max_pool(const Tensor& x, std::size_t k, std::size_t stride);
Tensor avg_pool(const Tensor& x, std::size_t k, std::size_t stride);

/// Per-channel spatial mean, shaped (N, C, 1, 1).
Tensor global_avg_pool(const Tensor& x);

/// Inverted dropout. The mask is a pure function of (seed, element index).
Tensor dropout(const Tensor& x, double rate, Mode mode, std::uint64_t seed);

/// Mean over the batch of -log softmax(logits)[label]; logits are (N, K, 1, 1).
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace adapto
