#pragma once

#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "adapto/tensor.hpp"

namespace adapto {

/// Gradients keyed by tensor identity. Every entry has its tensor's shape.
class GradientMap {
 public:
  [[nodiscard]] bool contains(const Tensor& t) const { return grads_.contains(t.id()); }
  /// Throws ContractError when no gradient was recorded for `t`.
  [[nodiscard]] const Tensor& at(const Tensor& t) const;
  [[nodiscard]] std::size_t size() const { return grads_.size(); }

  void insert(const Tensor& t, Tensor grad);

 private:
  std::unordered_map<const detail::TensorImpl*, Tensor> grads_;
};

/// Accumulators for the inputs of one recorded node; null where the input
/// does not need a gradient. Backward rules add into them.
using GradSlots = std::span<std::vector<double>* const>;
using BackwardRule = std::function<void(std::span<const double> grad_out, GradSlots grad_in)>;

/// Define-by-run record of differentiable operations.
///
/// Nodes are appended in execution order, so inputs always precede the
/// node that consumes them. A tape belongs to one forward/backward pass and
/// must not be shared between threads.
class Tape {
 public:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardRule backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] bool empty() const { return nodes_.empty(); }
  [[nodiscard]] const std::vector<Node>& nodes() const { return nodes_; }

  void push(Node node) { nodes_.push_back(std::move(node)); }
  void clear() { nodes_.clear(); }

  /// Reverse sweep from a (1,1,1,1) loss. Returns the gradient of every leaf
  /// with requires_grad reached from the loss; fan-out contributions sum.
  [[nodiscard]] GradientMap backward(const Tensor& loss) const;

 private:
  std::vector<Node> nodes_;
};

/// Makes `tape` the recording target on this thread for the guard's lifetime.
class RecordScope {
 public:
  explicit RecordScope(Tape& tape);
  ~RecordScope();
  RecordScope(const RecordScope&) = delete;
  RecordScope& operator=(const RecordScope&) = delete;

 private:
  Tape* previous_;
};

/// Tape currently recording on this thread, or nullptr.
Tape* active_tape();

/// Appends a node when a tape is active and some input requires a gradient.
/// Marks `output` as requiring grad in that case.
void record(Tensor& output, std::vector<Tensor> inputs, BackwardRule rule);

GradientMap backward(const Tape& tape, const Tensor& loss);

}  // namespace adapto
