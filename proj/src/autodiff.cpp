#include "adapto/autodiff.hpp"

#include <algorithm>
#include <unordered_set>

#include "adapto/errors.hpp"

namespace adapto {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

const Tensor& GradientMap::at(const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) {
    throw ContractError("no gradient recorded for tensor of shape " + to_string(t.shape()));
  }
  return it->second;
}

void GradientMap::insert(const Tensor& t, Tensor grad) {
  if (grad.shape() != t.shape()) {
    throw ShapeError("gradient shape " + to_string(grad.shape()) + " differs from tensor shape " +
                     to_string(t.shape()));
  }
  grads_.insert_or_assign(t.id(), std::move(grad));
}

RecordScope::RecordScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
RecordScope::~RecordScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void record(Tensor& output, std::vector<Tensor> inputs, BackwardRule rule) {
  Tape* tape = g_active_tape;
  if (tape == nullptr) return;
  if (std::none_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); })) {
    return;
  }
  output.set_requires_grad(true);
  tape->push({std::move(inputs), output, std::move(rule)});
}

GradientMap Tape::backward(const Tensor& loss) const {
  if (!loss.shape().is_scalar()) {
    throw ContractError("backward needs a (1,1,1,1) loss, got " + to_string(loss.shape()));
  }
  if (nodes_.empty()) {
    throw ContractError("backward called on an empty tape");
  }

  std::unordered_map<const detail::TensorImpl*, std::vector<double>> acc;
  std::unordered_set<const detail::TensorImpl*> produced;
  for (const Node& node : nodes_) produced.insert(node.output.id());
  if (!produced.contains(loss.id())) {
    throw ContractError("loss was not produced by an operation on this tape");
  }

  acc[loss.id()] = std::vector<double>{1.0};

  std::vector<std::vector<double>*> slots;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto out = acc.find(it->output.id());
    if (out == acc.end()) continue;
    slots.assign(it->inputs.size(), nullptr);
    for (std::size_t i = 0; i < it->inputs.size(); ++i) {
      const Tensor& in = it->inputs[i];
      if (!in.requires_grad()) continue;
      auto [slot, inserted] = acc.try_emplace(in.id());
      if (inserted) slot->second.assign(in.numel(), 0.0);
      slots[i] = &slot->second;
    }
    // try_emplace may rehash; look the output up again before handing it out.
    const std::vector<double>& grad_out = acc.at(it->output.id());
    it->backward(grad_out, slots);
  }

  GradientMap result;
  std::unordered_set<const detail::TensorImpl*> seen;
  for (const Node& node : nodes_) {
    for (const Tensor& in : node.inputs) {
      if (!in.requires_grad() || produced.contains(in.id()) || !seen.insert(in.id()).second) continue;
      auto g = acc.find(in.id());
      if (g == acc.end()) continue;
      result.insert(in, Tensor(in.shape(), std::move(g->second)));
    }
  }
  return result;
}

GradientMap backward(const Tape& tape, const Tensor& loss) { return tape.backward(loss); }

}  // namespace adapto
