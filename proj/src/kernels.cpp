#include "adapto/kernels.hpp"

#include <algorithm>
#include <vector>

namespace adapto::kernels {

namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 14;
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  const bool parallel = m * n * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  const bool parallel = m * n * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += arow[p] * brow[p];
      c[i * n + j] += sum;
    }
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  const bool parallel = m * n * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p * m + i];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void im2col(const ConvGeometry& g, const double* image, double* columns) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), kk = g.kernel * g.kernel;
  const auto rows = static_cast<std::ptrdiff_t>(g.patch_size());
  const bool parallel = g.patch_size() * oh * ow >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t ch = r / kk;
    const std::size_t kh = (r % kk) / g.kernel;
    const std::size_t kw = r % g.kernel;
    const double* plane = image + ch * g.in_h * g.in_w;
    double* out = columns + r * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + kh) - static_cast<std::ptrdiff_t>(g.padding);
      for (std::size_t x = 0; x < ow; ++x) {
        const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kw) - static_cast<std::ptrdiff_t>(g.padding);
        const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.in_h) &&
                            ix < static_cast<std::ptrdiff_t>(g.in_w);
        out[y * ow + x] = inside ? plane[iy * g.in_w + ix] : 0.0;
      }
    }
  }
}

void col2im(const ConvGeometry& g, const double* columns, double* image) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), kk = g.kernel * g.kernel;
  const bool parallel = g.patch_size() * oh * ow >= kParallelWork;
  // One thread per input channel: all rows touching a channel stay on that thread.
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t ch = 0; ch < static_cast<std::ptrdiff_t>(g.in_channels); ++ch) {
    double* plane = image + ch * g.in_h * g.in_w;
    for (std::size_t q = 0; q < kk; ++q) {
      const std::size_t kh = q / g.kernel, kw = q % g.kernel;
      const double* in = columns + (ch * kk + q) * oh * ow;
      for (std::size_t y = 0; y < oh; ++y) {
        const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + kh) - static_cast<std::ptrdiff_t>(g.padding);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
        for (std::size_t x = 0; x < ow; ++x) {
          const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kw) - static_cast<std::ptrdiff_t>(g.padding);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
          plane[iy * g.in_w + ix] += in[y * ow + x];
        }
      }
    }
  }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y) {
  const std::size_t pix = g.out_h() * g.out_w();
  const std::size_t in_size = g.in_channels * g.in_h * g.in_w;
  const std::size_t out_size = g.out_channels * pix;
  std::vector<double> columns(g.is_pointwise() ? 0 : g.patch_size() * pix);

  for (std::size_t n = 0; n < g.batch; ++n) {
    const double* image = x.data() + n * in_size;
    double* out = y.data() + n * out_size;
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      const double b = bias.empty() ? 0.0 : bias[o];
      std::fill(out + o * pix, out + (o + 1) * pix, b);
    }
    const double* cols = image;
    if (!g.is_pointwise()) {
      im2col(g, image, columns.data());
      cols = columns.data();
    }
    gemm_nn(g.out_channels, pix, g.patch_size(), weight.data(), cols, out);
  }
}

void conv2d_backward(const ConvGeometry& g, std::span<const double> x, std::span<const double> weight,
                     std::span<const double> grad_y, std::span<double> grad_x,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
  const std::size_t pix = g.out_h() * g.out_w();
  const std::size_t in_size = g.in_channels * g.in_h * g.in_w;
  const std::size_t out_size = g.out_channels * pix;
  const bool lowered = !g.is_pointwise();
  std::vector<double> columns(lowered && !grad_weight.empty() ? g.patch_size() * pix : 0);
  std::vector<double> grad_columns(lowered && !grad_x.empty() ? g.patch_size() * pix : 0);

  for (std::size_t n = 0; n < g.batch; ++n) {
    const double* image = x.data() + n * in_size;
    const double* gy = grad_y.data() + n * out_size;

    if (!grad_bias.empty()) {
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        double s = 0.0;
        for (std::size_t p = 0; p < pix; ++p) s += gy[o * pix + p];
        grad_bias[o] += s;
      }
    }
    if (!grad_weight.empty()) {
      const double* cols = image;
      if (lowered) {
        im2col(g, image, columns.data());
        cols = columns.data();
      }
      gemm_nt(g.out_channels, g.patch_size(), pix, gy, cols, grad_weight.data());
    }
    if (!grad_x.empty()) {
      double* gx = grad_x.data() + n * in_size;
      if (lowered) {
        std::fill(grad_columns.begin(), grad_columns.end(), 0.0);
        gemm_tn(g.patch_size(), pix, g.out_channels, weight.data(), gy, grad_columns.data());
        col2im(g, grad_columns.data(), gx);
      } else {
        gemm_tn(g.patch_size(), pix, g.out_channels, weight.data(), gy, gx);
      }
    }
  }
}

void depthwise_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> weight,
                       std::span<const double> bias, std::span<double> y) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), kk = g.kernel * g.kernel;
  const auto planes = static_cast<std::ptrdiff_t>(g.batch * g.in_channels);
  const bool parallel = static_cast<std::size_t>(planes) * oh * ow * kk >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t nc = 0; nc < planes; ++nc) {
    const std::size_t ch = nc % g.in_channels;
    const double* in = x.data() + nc * g.in_h * g.in_w;
    const double* kern = weight.data() + ch * kk;
    double* out = y.data() + nc * oh * ow;
    const double b = bias.empty() ? 0.0 : bias[ch];
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double sum = 0.0;
        for (std::size_t kh = 0; kh < g.kernel; ++kh) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + kh) - static_cast<std::ptrdiff_t>(g.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          for (std::size_t kw = 0; kw < g.kernel; ++kw) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kw) - static_cast<std::ptrdiff_t>(g.padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            sum += kern[kh * g.kernel + kw] * in[iy * g.in_w + ix];
          }
        }
        out[oy * ow + ox] = sum + b;
      }
    }
  }
}

void depthwise_backward(const ConvGeometry& g, std::span<const double> x, std::span<const double> weight,
                        std::span<const double> grad_y, std::span<double> grad_x,
                        std::span<double> grad_weight, std::span<double> grad_bias) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), kk = g.kernel * g.kernel;
  const std::size_t plane_in = g.in_h * g.in_w, plane_out = oh * ow;
  const bool parallel = g.batch * g.in_channels * plane_out * kk >= kParallelWork;
  // Parallel over channels; the batch loop stays inside so weight/bias
  // gradients accumulate in a fixed order.
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t ch = 0; ch < static_cast<std::ptrdiff_t>(g.in_channels); ++ch) {
    const double* kern = weight.data() + ch * kk;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const std::size_t nc = n * g.in_channels + ch;
      const double* in = x.data() + nc * plane_in;
      const double* gy = grad_y.data() + nc * plane_out;
      double* gx = grad_x.empty() ? nullptr : grad_x.data() + nc * plane_in;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double go = gy[oy * ow + ox];
          if (!grad_bias.empty()) grad_bias[ch] += go;
          for (std::size_t kh = 0; kh < g.kernel; ++kh) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + kh) - static_cast<std::ptrdiff_t>(g.padding);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
            for (std::size_t kw = 0; kw < g.kernel; ++kw) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kw) - static_cast<std::ptrdiff_t>(g.padding);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
              const std::size_t at = iy * g.in_w + ix;
              if (!grad_weight.empty()) grad_weight[ch * kk + kh * g.kernel + kw] += go * in[at];
              if (gx != nullptr) gx[at] += go * kern[kh * g.kernel + kw];
            }
          }
        }
      }
    }
  }
}

}  // namespace adapto::kernels
