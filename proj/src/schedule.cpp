#include "adapto/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adapto/errors.hpp"
#include "adapto/train.hpp"

namespace adapto {

double lr_at(double epoch, double lr0, double decay_factor, double decay_period_epochs, bool staircase) {
  if (!(epoch >= 0.0)) throw ArgumentError("lr_at: epoch must be non-negative");
  double periods = epoch / decay_period_epochs;
  if (staircase) periods = std::floor(periods);
  return lr0 * std::pow(decay_factor, periods);
}

double lr_at(double epoch, const TrainConfig& cfg) {
  return lr_at(epoch, cfg.lr0, cfg.decay_factor, cfg.decay_period_epochs, cfg.staircase);
}

double dropout_rate_for_block(std::size_t block_index, std::size_t n_blocks, double start, double end) {
  if (n_blocks < 1 || block_index >= n_blocks) {
    throw ArgumentError("dropout_rate_for_block: index " + std::to_string(block_index) + " outside " +
                        std::to_string(n_blocks) + " blocks");
  }
  const double t = static_cast<double>(block_index) / static_cast<double>(std::max<std::size_t>(1, n_blocks - 1));
  // Weighted form hits both endpoints exactly.
  return (1.0 - t) * start + t * end;
}

}  // namespace adapto
