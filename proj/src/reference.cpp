#include "adapto/reference.hpp"

namespace adapto::reference {

namespace {
thread_local bool g_active = false;
thread_local std::uint64_t* g_counter = nullptr;

double tap(std::span<const double> plane, const kernels::ConvGeometry& g, long iy, long ix) {
  if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_h) || ix >= static_cast<long>(g.in_w)) return 0.0;
  return plane[iy * g.in_w + ix];
}
}  // namespace

void conv2d_naive(const kernels::ConvGeometry& g, std::span<const double> x,
                  std::span<const double> weight, std::span<const double> bias, std::span<double> y,
                  std::uint64_t* macs) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), k = g.kernel;
  const std::size_t plane = g.in_h * g.in_w;
  std::uint64_t count = 0;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (std::size_t c = 0; c < g.in_channels; ++c) {
            auto in = x.subspan((n * g.in_channels + c) * plane, plane);
            for (std::size_t kh = 0; kh < k; ++kh) {
              for (std::size_t kw = 0; kw < k; ++kw) {
                const long iy = static_cast<long>(oy * g.stride + kh) - static_cast<long>(g.padding);
                const long ix = static_cast<long>(ox * g.stride + kw) - static_cast<long>(g.padding);
                acc += weight[((o * g.in_channels + c) * k + kh) * k + kw] * tap(in, g, iy, ix);
                ++count;
              }
            }
          }
          y[((n * g.out_channels + o) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
  if (macs != nullptr) *macs += count;
}

void depthwise_naive(const kernels::ConvGeometry& g, std::span<const double> x,
                     std::span<const double> weight, std::span<const double> bias,
                     std::span<double> y, std::uint64_t* macs) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), k = g.kernel;
  const std::size_t plane = g.in_h * g.in_w;
  std::uint64_t count = 0;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      auto in = x.subspan((n * g.in_channels + c) * plane, plane);
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[c];
          for (std::size_t kh = 0; kh < k; ++kh) {
            for (std::size_t kw = 0; kw < k; ++kw) {
              const long iy = static_cast<long>(oy * g.stride + kh) - static_cast<long>(g.padding);
              const long ix = static_cast<long>(ox * g.stride + kw) - static_cast<long>(g.padding);
              acc += weight[(c * k + kh) * k + kw] * tap(in, g, iy, ix);
              ++count;
            }
          }
          y[((n * g.in_channels + c) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
  if (macs != nullptr) *macs += count;
}

ReferenceScope::ReferenceScope(std::uint64_t* counter)
    : previous_active_(g_active), previous_counter_(g_counter) {
  g_active = true;
  g_counter = counter;
}

ReferenceScope::~ReferenceScope() {
  g_active = previous_active_;
  g_counter = previous_counter_;
}

bool ReferenceScope::active() { return g_active; }
std::uint64_t* ReferenceScope::counter() { return g_counter; }

}  // namespace adapto::reference
