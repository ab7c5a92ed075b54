#include "adapto/layers.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "adapto/autodiff.hpp"
#include "adapto/errors.hpp"
#include "adapto/kernels.hpp"
#include "adapto/reference.hpp"

namespace adapto {

namespace {

std::span<const double> bias_span(const ConvParams& p) {
  return p.bias ? p.bias->data() : std::span<const double>{};
}

kernels::ConvGeometry geometry(const Tensor& x, const ConvParams& p, const char* op) {
  const Shape& xs = x.shape();
  const Shape& ws = p.weight.shape();
  if (ws.h != ws.w || ws.h == 0) {
    throw ShapeError(std::string(op) + ": kernel must be square, got " + to_string(ws));
  }
  if (p.stride == 0) throw ArgumentError(std::string(op) + ": stride must be positive");
  if (xs.h + 2 * p.padding < ws.h || xs.w + 2 * p.padding < ws.w) {
    throw ShapeError(std::string(op) + ": non-positive output extent for input " + to_string(xs) +
                     " with kernel " + std::to_string(ws.h) + " and padding " + std::to_string(p.padding));
  }
  kernels::ConvGeometry g;
  g.batch = xs.n;
  g.in_channels = xs.c;
  g.in_h = xs.h;
  g.in_w = xs.w;
  g.out_channels = ws.n;
  g.kernel = ws.h;
  g.stride = p.stride;
  g.padding = p.padding;
  return g;
}

void check_bias(const ConvParams& p, std::size_t channels, const char* op) {
  if (p.bias && p.bias->shape() != Shape{1, channels, 1, 1}) {
    throw ShapeError(std::string(op) + ": bias must be (1," + std::to_string(channels) + ",1,1), got " +
                     to_string(p.bias->shape()));
  }
}

std::span<double> slot_span(std::vector<double>* slot) {
  return slot != nullptr ? std::span<double>(*slot) : std::span<double>{};
}

}  // namespace

BatchNormParams BatchNormParams::identity(std::size_t channels, double eps, double momentum) {
  const Shape s{1, channels, 1, 1};
  return {Tensor::full(s, 1.0), Tensor::zeros(s), Tensor::zeros(s), Tensor::full(s, 1.0), eps, momentum};
}

Tensor conv2d(const Tensor& x, const ConvParams& p) {
  const kernels::ConvGeometry g = geometry(x, p, "conv2d");
  if (p.weight.shape().c != x.shape().c) {
    throw ShapeError("conv2d: input has " + std::to_string(x.shape().c) + " channels, kernel expects " +
                     std::to_string(p.weight.shape().c));
  }
  check_bias(p, g.out_channels, "conv2d");

  Tensor y = Tensor::zeros({g.batch, g.out_channels, g.out_h(), g.out_w()});
  if (reference::ReferenceScope::active()) {
    reference::conv2d_naive(g, x.data(), p.weight.data(), bias_span(p), y.mutable_data(),
                            reference::ReferenceScope::counter());
  } else {
    kernels::conv2d_forward(g, x.data(), p.weight.data(), bias_span(p), y.mutable_data());
  }

  std::vector<Tensor> inputs{x, p.weight};
  if (p.bias) inputs.push_back(*p.bias);
  record(y, std::move(inputs), [g, x, w = p.weight](std::span<const double> gy, GradSlots in) {
    kernels::conv2d_backward(g, x.data(), w.data(), gy, slot_span(in[0]), slot_span(in[1]),
                             in.size() > 2 ? slot_span(in[2]) : std::span<double>{});
  });
  return y;
}

Tensor depthwise_conv2d(const Tensor& x, const ConvParams& p) {
  const kernels::ConvGeometry g = geometry(x, p, "depthwise_conv2d");
  const Shape& ws = p.weight.shape();
  if (ws.n != x.shape().c || ws.c != 1) {
    throw ShapeError("depthwise_conv2d: kernel " + to_string(ws) + " does not match " +
                     std::to_string(x.shape().c) + " input channels (expected (C,1,k,k))");
  }
  check_bias(p, x.shape().c, "depthwise_conv2d");

  Tensor y = Tensor::zeros({g.batch, g.in_channels, g.out_h(), g.out_w()});
  if (reference::ReferenceScope::active()) {
    reference::depthwise_naive(g, x.data(), p.weight.data(), bias_span(p), y.mutable_data(),
                               reference::ReferenceScope::counter());
  } else {
    kernels::depthwise_forward(g, x.data(), p.weight.data(), bias_span(p), y.mutable_data());
  }

  std::vector<Tensor> inputs{x, p.weight};
  if (p.bias) inputs.push_back(*p.bias);
  record(y, std::move(inputs), [g, x, w = p.weight](std::span<const double> gy, GradSlots in) {
    kernels::depthwise_backward(g, x.data(), w.data(), gy, slot_span(in[0]), slot_span(in[1]),
                                in.size() > 2 ? slot_span(in[2]) : std::span<double>{});
  });
  return y;
}

Tensor pointwise_conv2d(const Tensor& x, const ConvParams& p) {
  if (p.kernel() != 1 || p.weight.shape().w != 1 || p.stride != 1 || p.padding != 0) {
    throw ContractError("pointwise_conv2d: needs a 1x1 kernel with stride 1 and padding 0, got kernel " +
                        to_string(p.weight.shape()) + " stride " + std::to_string(p.stride) +
                        " padding " + std::to_string(p.padding));
  }
  return conv2d(x, p);
}

Tensor batch_norm(const Tensor& x, BatchNormParams& p, Mode mode) {
  const Shape& s = x.shape();
  const std::size_t channels = s.c;
  const Shape cs{1, channels, 1, 1};
  if (p.gamma.shape() != cs || p.beta.shape() != cs || p.running_mean.shape() != cs ||
      p.running_var.shape() != cs) {
    throw ShapeError("batch_norm: parameters do not match " + std::to_string(channels) + " channels");
  }
  if (!(p.eps > 0.0)) throw ArgumentError("batch_norm: eps must be positive");
  const std::size_t plane = s.plane();
  const std::size_t count = s.n * plane;
  if (mode == Mode::train && count == 0) {
    throw ContractError("batch_norm: train mode needs at least one element per channel");
  }

  std::vector<double> mean(channels), inv_std(channels);
  std::vector<double> xhat(x.numel());
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  const auto gamma = p.gamma.data();
  const auto beta = p.beta.data();

#pragma omp parallel for schedule(static) if (x.numel() >= (1u << 15))
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(channels); ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    double m = 0.0, var = 0.0;
    if (mode == Mode::train) {
      for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t q = 0; q < plane; ++q) m += xv[(n * channels + c) * plane + q];
      }
      m /= static_cast<double>(count);
      for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t q = 0; q < plane; ++q) {
          const double d = xv[(n * channels + c) * plane + q] - m;
          var += d * d;
        }
      }
      var /= static_cast<double>(count);
    } else {
      m = p.running_mean[c];
      var = p.running_var[c];
    }
    mean[c] = m;
    inv_std[c] = 1.0 / std::sqrt(var + p.eps);
    for (std::size_t n = 0; n < s.n; ++n) {
      for (std::size_t q = 0; q < plane; ++q) {
        const std::size_t i = (n * channels + c) * plane + q;
        xhat[i] = (xv[i] - m) * inv_std[c];
        out[i] = gamma[c] * xhat[i] + beta[c];
      }
    }
    if (mode == Mode::train) {
      auto rm = p.running_mean.mutable_data();
      auto rv = p.running_var.mutable_data();
      rm[c] = p.momentum * rm[c] + (1.0 - p.momentum) * m;
      rv[c] = p.momentum * rv[c] + (1.0 - p.momentum) * var;
    }
  }

  Tensor y(s, std::move(out));
  record(y, {x, p.gamma, p.beta},
         [s, mode, xhat = std::move(xhat), inv_std = std::move(inv_std), g = p.gamma](
             std::span<const double> gy, GradSlots in) {
           const std::size_t channels = s.c, plane = s.plane();
           const double count = static_cast<double>(s.n * plane);
#pragma omp parallel for schedule(static) if (gy.size() >= (1u << 15))
           for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(channels); ++ci) {
             const auto c = static_cast<std::size_t>(ci);
             double sum_g = 0.0, sum_gx = 0.0;
             for (std::size_t n = 0; n < s.n; ++n) {
               for (std::size_t q = 0; q < plane; ++q) {
                 const std::size_t i = (n * channels + c) * plane + q;
                 sum_g += gy[i];
                 sum_gx += gy[i] * xhat[i];
               }
             }
             if (in[1] != nullptr) (*in[1])[c] += sum_gx;
             if (in[2] != nullptr) (*in[2])[c] += sum_g;
             if (in[0] == nullptr) continue;
             auto& gx = *in[0];
             const double k = g[c] * inv_std[c];
             for (std::size_t n = 0; n < s.n; ++n) {
               for (std::size_t q = 0; q < plane; ++q) {
                 const std::size_t i = (n * channels + c) * plane + q;
                 if (mode == Mode::train) {
                   gx[i] += k * (gy[i] - sum_g / count - xhat[i] * sum_gx / count);
                 } else {
                   gx[i] += k * gy[i];
                 }
               }
             }
           }
         });
  return y;
}

Tensor elu(const Tensor& x, double alpha) {
  if (!(alpha > 0.0)) throw ArgumentError("elu: alpha must be positive");
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x[i];
    out[i] = v > 0.0 ? v : alpha * std::expm1(v);
  }
  Tensor y(x.shape(), std::move(out));
  record(y, {x}, [x, alpha](std::span<const double> gy, GradSlots in) {
    auto& gx = *in[0];
    for (std::size_t i = 0; i < gy.size(); ++i) {
      const double v = x[i];
      gx[i] += gy[i] * (v > 0.0 ? 1.0 : alpha * std::exp(v));
    }
  });
  return y;
}

namespace {

Shape pooled_shape(const Tensor& x, std::size_t k, std::size_t stride, const char* op) {
  const Shape& s = x.shape();
  if (k == 0 || stride == 0) throw ArgumentError(std::string(op) + ": window and stride must be positive");
  if (s.h < k || s.w < k) {
    throw ShapeError(std::string(op) + ": window " + std::to_string(k) + " larger than input " + to_string(s));
  }
  return {s.n, s.c, (s.h - k) / stride + 1, (s.w - k) / stride + 1};
}

}  // namespace

Tensor max_pool(const Tensor& x, std::size_t k, std::size_t stride) {
  const Shape os = pooled_shape(x, k, stride, "max_pool");
  const Shape& s = x.shape();
  std::vector<double> out(os.numel());
  std::vector<std::size_t> argmax(os.numel());
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    for (std::size_t oy = 0; oy < os.h; ++oy) {
      for (std::size_t ox = 0; ox < os.w; ++ox) {
        std::size_t best = nc * s.plane() + (oy * stride) * s.w + ox * stride;
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t i = nc * s.plane() + (oy * stride + ky) * s.w + ox * stride + kx;
            if (x[i] > x[best]) best = i;
          }
        }
        const std::size_t o = (nc * os.h + oy) * os.w + ox;
        out[o] = x[best];
        argmax[o] = best;
      }
    }
  }
  Tensor y(os, std::move(out));
  record(y, {x}, [argmax = std::move(argmax)](std::span<const double> gy, GradSlots in) {
    auto& gx = *in[0];
    for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax[o]] += gy[o];
  });
  return y;
}

Tensor avg_pool(const Tensor& x, std::size_t k, std::size_t stride) {
  const Shape os = pooled_shape(x, k, stride, "avg_pool");
  const Shape& s = x.shape();
  const double inv = 1.0 / static_cast<double>(k * k);
  std::vector<double> out(os.numel());
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    for (std::size_t oy = 0; oy < os.h; ++oy) {
      for (std::size_t ox = 0; ox < os.w; ++ox) {
        double acc = 0.0;
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            acc += x[nc * s.plane() + (oy * stride + ky) * s.w + ox * stride + kx];
          }
        }
        out[(nc * os.h + oy) * os.w + ox] = acc * inv;
      }
    }
  }
  Tensor y(os, std::move(out));
  record(y, {x}, [s, os, k, stride, inv](std::span<const double> gy, GradSlots in) {
    auto& gx = *in[0];
    for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
      for (std::size_t oy = 0; oy < os.h; ++oy) {
        for (std::size_t ox = 0; ox < os.w; ++ox) {
          const double g = gy[(nc * os.h + oy) * os.w + ox] * inv;
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              gx[nc * s.plane() + (oy * stride + ky) * s.w + ox * stride + kx] += g;
            }
          }
        }
      }
    }
  });
  return y;
}

Tensor global_avg_pool(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.h == 0 || s.w == 0) throw ShapeError("global_avg_pool: empty spatial extent " + to_string(s));
  const std::size_t plane = s.plane();
  const double area = static_cast<double>(plane);
  std::vector<double> out(s.n * s.c);
  for (std::size_t nc = 0; nc < out.size(); ++nc) {
    double acc = 0.0;
    for (std::size_t q = 0; q < plane; ++q) acc += x[nc * plane + q];
    out[nc] = acc / area;
  }
  Tensor y({s.n, s.c, 1, 1}, std::move(out));
  record(y, {x}, [plane, area](std::span<const double> gy, GradSlots in) {
    auto& gx = *in[0];
    for (std::size_t nc = 0; nc < gy.size(); ++nc) {
      const double g = gy[nc] / area;
      for (std::size_t q = 0; q < plane; ++q) gx[nc * plane + q] += g;
    }
  });
  return y;
}

Tensor dropout(const Tensor& x, double rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ArgumentError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::eval || rate == 0.0) return x;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = uniform(rng) < rate ? 0.0 : keep_scale;
    out[i] = x[i] * mask[i];
  }
  Tensor y(x.shape(), std::move(out));
  record(y, {x}, [mask = std::move(mask)](std::span<const double> gy, GradSlots in) {
    auto& gx = *in[0];
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * mask[i];
  });
  return y;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  if (s.h != 1 || s.w != 1) {
    throw ShapeError("softmax_cross_entropy: logits must be (N,K,1,1), got " + to_string(s));
  }
  if (labels.size() != s.n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(s.n));
  }
  const std::size_t classes = s.c;
  for (std::size_t n = 0; n < s.n; ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= classes) {
      throw DataError("softmax_cross_entropy: label " + std::to_string(labels[n]) + " outside [0, " +
                      std::to_string(classes) + ")");
    }
  }

  std::vector<double> probs(logits.numel());
  double loss = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* z = logits.data().data() + n * classes;
    const double zmax = *std::max_element(z, z + classes);
    double denom = 0.0;
    for (std::size_t k = 0; k < classes; ++k) denom += std::exp(z[k] - zmax);
    const double log_denom = std::log(denom);
    for (std::size_t k = 0; k < classes; ++k) probs[n * classes + k] = std::exp(z[k] - zmax - log_denom);
    loss -= z[labels[n]] - zmax - log_denom;
  }
  const double batch = static_cast<double>(s.n);
  Tensor y = Tensor::scalar(loss / batch);
  std::vector<int> targets(labels.begin(), labels.end());
  record(y, {logits}, [probs = std::move(probs), targets = std::move(targets), classes, batch](
                          std::span<const double> gy, GradSlots in) {
    auto& gz = *in[0];
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const bool hot = static_cast<std::size_t>(targets[i / classes]) == i % classes;
      gz[i] += gy[0] * (probs[i] - (hot ? 1.0 : 0.0)) / batch;
    }
  });
  return y;
}

}  // namespace adapto
