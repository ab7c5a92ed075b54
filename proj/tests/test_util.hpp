#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "adapto/tensor.hpp"

namespace adapto::oracle {

inline Tensor random_tensor(Shape s, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(s.numel());
  for (double& x : v) x = nd(rng);
  return Tensor(s, std::move(v));
}

inline Tensor uniform_tensor(Shape s, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> ud(lo, hi);
  std::vector<double> v(s.numel());
  for (double& x : v) x = ud(rng);
  return Tensor(s, std::move(v));
}

/// Textbook cross-correlation, written directly from the definition.
inline std::vector<double> conv_oracle(const Tensor& x, const Tensor& w, const std::vector<double>& bias,
                                       std::size_t stride, std::size_t pad, std::uint64_t* macs = nullptr) {
  const Shape xs = x.shape(), ws = w.shape();
  const long k = static_cast<long>(ws.h);
  const std::size_t ho = (xs.h + 2 * pad - ws.h) / stride + 1;
  const std::size_t wo = (xs.w + 2 * pad - ws.w) / stride + 1;
  std::vector<double> y(xs.n * ws.n * ho * wo, 0.0);
  std::size_t idx = 0;
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t o = 0; o < ws.n; ++o)
      for (std::size_t i = 0; i < ho; ++i)
        for (std::size_t j = 0; j < wo; ++j) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (std::size_t c = 0; c < xs.c; ++c)
            for (long a = 0; a < k; ++a)
              for (long b = 0; b < k; ++b) {
                const long r = static_cast<long>(i * stride) + a - static_cast<long>(pad);
                const long q = static_cast<long>(j * stride) + b - static_cast<long>(pad);
                if (macs) ++*macs;
                if (r < 0 || q < 0 || r >= static_cast<long>(xs.h) || q >= static_cast<long>(xs.w)) continue;
                acc += x.at(n, c, r, q) * w.at(o, c, a, b);
              }
          y[idx++] = acc;
        }
  return y;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return a.size() == b.size() ? m : 1e300;
}

}  // namespace adapto::oracle
