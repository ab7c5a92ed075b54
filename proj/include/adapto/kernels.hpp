#pragma once

// OpenMP-parallel compute kernels behind the differentiable layers.
//
// Every parallel loop partitions its writes so that each output element is
// produced by exactly one thread with a fixed summation order; results are
// therefore bit-identical for any thread count. The serial oracles these
// kernels are tested against live in reference.hpp.

#include <cstddef>
#include <span>

namespace adapto::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  [[nodiscard]] std::size_t out_h() const { return (in_h + 2 * padding - kernel) / stride + 1; }
  [[nodiscard]] std::size_t out_w() const { return (in_w + 2 * padding - kernel) / stride + 1; }
  /// Rows of the lowered patch matrix.
  [[nodiscard]] std::size_t patch_size() const { return in_channels * kernel * kernel; }
  [[nodiscard]] bool is_pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }
};

/// C(MxN) += A(MxK) * B(KxN), row-major.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
/// C(MxN) += A(MxK) * B(NxK)^T.
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
/// C(MxN) += A(KxM)^T * B(KxN).
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);

/// Unrolls one image (C,H,W) into a (C*k*k) x (Ho*Wo) patch matrix; padding reads as zero.
void im2col(const ConvGeometry& g, const double* image, double* columns);
/// Adjoint of im2col: scatters-adds patch columns back into an image buffer.
void col2im(const ConvGeometry& g, const double* columns, double* image);

/// y = conv(x, weight) + bias, via im2col + GEMM. `bias` may be empty.
void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y);

/// Accumulates into whichever of grad_x / grad_weight / grad_bias is non-empty.
void conv2d_backward(const ConvGeometry& g, std::span<const double> x, std::span<const double> weight,
                     std::span<const double> grad_y, std::span<double> grad_x,
                     std::span<double> grad_weight, std::span<double> grad_bias);

/// Per-channel convolution; weight is (C,1,k,k) and out_channels == in_channels.
void depthwise_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> weight,
                       std::span<const double> bias, std::span<double> y);

void depthwise_backward(const ConvGeometry& g, std::span<const double> x, std::span<const double> weight,
                        std::span<const double> grad_y, std::span<double> grad_x,
                        std::span<double> grad_weight, std::span<double> grad_bias);

}  // namespace adapto::kernels
