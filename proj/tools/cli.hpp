#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "adapto/config.hpp"

namespace adapto::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2, kNumerical = 3 };

/// Runs one invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// A small instance of `config` for gradient checking: one or two units per
/// stage at the narrowest integral width, 3 classes, minimal input extent.
/// The mini preset is returned unchanged.
ModelConfig miniature(const ModelConfig& config);

/// 0.175 scaled by stem width relative to the cifar-32 preset, capped at 0.175.
double default_lr0(const ModelConfig& config);

}  // namespace adapto::cli
