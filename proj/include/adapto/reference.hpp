#pragma once

// Serial, loop-per-index reference implementations. They share nothing with
// the lowered kernels in kernels.hpp and serve as test oracles, as the
// instrumented path for MAC counting, and as the benchmark baseline.

#include <cstdint>
#include <span>

#include "adapto/kernels.hpp"

namespace adapto::reference {

/// Direct six-deep loop convolution (batch, out channel, row, col, in channel,
/// kernel tap). Every tap, including taps over zero padding, is one MAC.
/// Adds the number of MACs performed to `*macs` when non-null.
void conv2d_naive(const kernels::ConvGeometry& g, std::span<const double> x,
                  std::span<const double> weight, std::span<const double> bias, std::span<double> y,
                  std::uint64_t* macs = nullptr);

void depthwise_naive(const kernels::ConvGeometry& g, std::span<const double> x,
                     std::span<const double> weight, std::span<const double> bias,
                     std::span<double> y, std::uint64_t* macs = nullptr);

/// While alive, convolution layers on this thread run their forward pass
/// through the naive kernels above and tally MACs into `counter`.
class ReferenceScope {
 public:
  explicit ReferenceScope(std::uint64_t* counter = nullptr);
  ~ReferenceScope();
  ReferenceScope(const ReferenceScope&) = delete;
  ReferenceScope& operator=(const ReferenceScope&) = delete;

  [[nodiscard]] static bool active();
  [[nodiscard]] static std::uint64_t* counter();

 private:
  bool previous_active_;
  std::uint64_t* previous_counter_;
};

}  // namespace adapto::reference
