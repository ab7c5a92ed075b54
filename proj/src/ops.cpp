#include "adapto/ops.hpp"

#include <cmath>

#include "adapto/autodiff.hpp"
#include "adapto/errors.hpp"

namespace adapto {

Tensor add(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    Tensor y(sa, std::move(out));
    record(y, {a, b}, [](std::span<const double> g, GradSlots in) {
      for (auto* slot : in) {
        if (slot == nullptr) continue;
        for (std::size_t i = 0; i < g.size(); ++i) (*slot)[i] += g[i];
      }
    });
    return y;
  }
  if (sb.n == sa.n && sb.c == sa.c && sb.h == 1 && sb.w == 1) {
    const std::size_t plane = sa.plane();
    std::vector<double> out(a.numel());
    for (std::size_t nc = 0; nc < sa.n * sa.c; ++nc) {
      for (std::size_t p = 0; p < plane; ++p) out[nc * plane + p] = a[nc * plane + p] + b[nc];
    }
    Tensor y(sa, std::move(out));
    record(y, {a, b}, [plane](std::span<const double> g, GradSlots in) {
      if (in[0] != nullptr) {
        for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i];
      }
      if (in[1] != nullptr) {
        auto& gb = *in[1];
        for (std::size_t nc = 0; nc < gb.size(); ++nc) {
          double s = 0.0;
          for (std::size_t p = 0; p < plane; ++p) s += g[nc * plane + p];
          gb[nc] += s;
        }
      }
    });
    return y;
  }
  throw ShapeError("add: incompatible shapes " + to_string(sa) + " and " + to_string(sb));
}

Tensor scale(const Tensor& a, double s) {
  if (!std::isfinite(s)) throw ArgumentError("scale: factor must be finite");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
  Tensor y(a.shape(), std::move(out));
  record(y, {a}, [s](std::span<const double> g, GradSlots in) {
    for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * s;
  });
  return y;
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  if (!s.shape().is_scalar()) {
    throw ShapeError("scale_by: factor must be (1,1,1,1), got " + to_string(s.shape()));
  }
  const double f = s[0];
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * f;
  Tensor y(a.shape(), std::move(out));
  record(y, {a, s}, [a, f](std::span<const double> g, GradSlots in) {
    if (in[0] != nullptr) {
      for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * f;
    }
    if (in[1] != nullptr) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * a[i];
      (*in[1])[0] += acc;
    }
  });
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: incompatible shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor y(a.shape(), std::move(out));
  record(y, {a, b}, [a, b](std::span<const double> g, GradSlots in) {
    if (in[0] != nullptr) {
      for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * b[i];
    }
    if (in[1] != nullptr) {
      for (std::size_t i = 0; i < g.size(); ++i) (*in[1])[i] += g[i] * a[i];
    }
  });
  return y;
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor y = Tensor::scalar(s);
  record(y, {a}, [](std::span<const double> g, GradSlots in) {
    for (double& v : *in[0]) v += g[0];
  });
  return y;
}

}  // namespace adapto
