#pragma once

#include "adapto/tensor.hpp"

namespace adapto {

/// Elementwise sum. `b` may instead be (N,C,1,1) with a's N and C, in which
/// case it is broadcast over the spatial axes.
Tensor add(const Tensor& a, const Tensor& b);

/// Every element times the finite constant `s`.
Tensor scale(const Tensor& a, double s);

/// Every element times the value of the (1,1,1,1) tensor `s`; differentiable in both.
Tensor scale_by(const Tensor& a, const Tensor& s);

/// Elementwise product of equal shapes.
Tensor mul(const Tensor& a, const Tensor& b);

/// Sum of all elements as a (1,1,1,1) tensor.
Tensor sum(const Tensor& a);

}  // namespace adapto
