#include "adapto/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "adapto/autodiff.hpp"
#include "adapto/errors.hpp"

namespace adapto {

namespace {

double evaluate(const std::function<Tensor()>& f) {
  const Tensor out = f();
  if (!out.shape().is_scalar()) {
    throw ContractError("grad_check: function must return a (1,1,1,1) tensor, got " + to_string(out.shape()));
  }
  return out[0];
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<NamedTensor> params,
                           GradCheckOptions options) {
  if (!(options.eps > 0.0)) throw ArgumentError("grad_check: eps must be positive");
  for (auto& p : params) p.tensor.set_requires_grad(true);

  const double first = evaluate(f);
  const double second = evaluate(f);
  if (first != second) {
    throw ContractError("grad_check: function is not deterministic (" + std::to_string(first) + " vs " +
                        std::to_string(second) + ")");
  }

  GradCheckResult result;
  Tape tape;
  Tensor loss;
  {
    RecordScope scope(tape);
    loss = f();
  }

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  if (tape.empty()) {
    // Constant function: nothing recorded, every tape gradient is zero.
    for (const auto& p : params) analytic.push_back(Tensor::zeros(p.tensor.shape()));
  } else {
    const GradientMap grads = tape.backward(loss);
    for (const auto& p : params) {
      analytic.push_back(grads.contains(p.tensor) ? grads.at(p.tensor) : Tensor::zeros(p.tensor.shape()));
    }
  }
  tape.clear();

  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& param = params[t].tensor;
    auto values = param.mutable_data();
    const std::size_t n = values.size();
    std::size_t stride = 1;
    if (options.max_coords_per_tensor > 0 && n > options.max_coords_per_tensor) {
      stride = (n + options.max_coords_per_tensor - 1) / options.max_coords_per_tensor;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = values[i];
      values[i] = saved + options.eps;
      const double plus = evaluate(f);
      values[i] = saved - options.eps;
      const double minus = evaluate(f);
      values[i] = saved;

      const double fd = (plus - minus) / (2.0 * options.eps);
      const double ad = analytic[t][i];
      const double err = std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
      worst = std::max(worst, err);
      ++result.coordinates;
    }
    result.per_tensor.emplace_back(params[t].name, worst);
    result.max_relative_error = std::max(result.max_relative_error, worst);
  }
  return result;
}

double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, double eps) {
  std::vector<NamedTensor> named;
  named.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) named.push_back({"param" + std::to_string(i), params[i]});
  GradCheckOptions options;
  options.eps = eps;
  return grad_check(f, std::move(named), options).max_relative_error;
}

}  // namespace adapto
