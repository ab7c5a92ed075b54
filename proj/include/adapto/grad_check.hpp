#pragma once

#include <functional>
#include <string>
#include <vector>

#include "adapto/tensor.hpp"

namespace adapto {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckResult {
  /// Max over all checked coordinates of |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
  double max_relative_error = 0.0;
  /// Same maximum restricted to each tensor, in argument order.
  std::vector<std::pair<std::string, double>> per_tensor;
  std::size_t coordinates = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  /// 0 checks every coordinate; otherwise an evenly strided subset of at most this many per tensor.
  std::size_t max_coords_per_tensor = 0;
};

/// Compares tape gradients of the scalar `f` against central finite
/// differences. `f` must be deterministic: it is evaluated twice up front
/// and a ContractError is raised if the results differ. Parameters are
/// perturbed in place and restored before returning.
GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<NamedTensor> params,
                           GradCheckOptions options = {});

double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, double eps);

}  // namespace adapto
