#include "adapto/tensor.hpp"

#include <sstream>

#include "adapto/errors.hpp"

namespace adapto {

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '(' << s.n << ',' << s.c << ',' << s.h << ',' << s.w << ')';
  return os.str();
}

Tensor::Tensor() : impl_(std::make_shared<detail::TensorImpl>()) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  if (values.size() != shape.numel()) {
    throw ShapeError("tensor " + to_string(shape) + ": expected " + std::to_string(shape.numel()) +
                     " values, got " + std::to_string(values.size()));
  }
  impl_->shape = shape;
  impl_->data = std::move(values);
}

Tensor Tensor::zeros(Shape shape) { return Tensor(shape, std::vector<double>(shape.numel(), 0.0)); }

Tensor Tensor::full(Shape shape, double value) {
  return Tensor(shape, std::vector<double>(shape.numel(), value));
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1, 1, 1}, {value}); }

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  const Shape& s = impl_->shape;
  return impl_->data[((n * s.c + c) * s.h + h) * s.w + w];
}

double Tensor::item() const {
  if (!impl_->shape.is_scalar()) {
    throw ShapeError("item() needs a (1,1,1,1) tensor, got " + to_string(impl_->shape));
  }
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

Tensor Tensor::clone() const { return Tensor(impl_->shape, impl_->data); }

Tensor tensor_new(Shape shape, std::vector<double> values) {
  return Tensor(shape, std::move(values));
}

}  // namespace adapto
