#pragma once

#include <cstddef>

namespace adapto {

struct TrainConfig;

/// lr0 * decay_factor^(epoch / decay_period_epochs). `epoch` may be fractional;
/// with `staircase` the exponent is floored to whole decay periods.
double lr_at(double epoch, const TrainConfig& cfg);
double lr_at(double epoch, double lr0, double decay_factor, double decay_period_epochs, bool staircase = false);

/// Linear ramp from `start` (first block) to `end` (last block).
double dropout_rate_for_block(std::size_t block_index, std::size_t n_blocks, double start, double end);

}  // namespace adapto
