#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace adapto {

/// Extents of a rank-4 NCHW tensor.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  [[nodiscard]] constexpr std::size_t numel() const { return n * c * h * w; }
  [[nodiscard]] constexpr std::size_t plane() const { return h * w; }
  [[nodiscard]] constexpr bool is_scalar() const { return n == 1 && c == 1 && h == 1 && w == 1; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
};
}  // namespace detail

/// Rank-4 array of doubles in row-major NCHW order.
///
/// A Tensor is a cheap handle: copies share storage, and identity (used by
/// the tape and by GradientMap) is the shared storage. Operations never
/// modify their inputs; only parameter owners (model builder, optimizer,
/// gradient checker) write through mutable_data() between passes.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  [[nodiscard]] const Shape& shape() const { return impl_->shape; }
  [[nodiscard]] std::size_t numel() const { return impl_->data.size(); }
  [[nodiscard]] std::span<const double> data() const { return impl_->data; }
  [[nodiscard]] std::span<double> mutable_data() { return impl_->data; }
  [[nodiscard]] const std::vector<double>& values() const { return impl_->data; }

  [[nodiscard]] double operator[](std::size_t i) const { return impl_->data[i]; }
  [[nodiscard]] double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;
  /// Value of a (1,1,1,1) tensor.
  [[nodiscard]] double item() const;

  [[nodiscard]] bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool flag);

  /// Deep copy with requires_grad cleared.
  [[nodiscard]] Tensor clone() const;

  [[nodiscard]] const detail::TensorImpl* id() const { return impl_.get(); }
  [[nodiscard]] bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Factory mirroring the construction contract: values must fill the shape exactly.
Tensor tensor_new(Shape shape, std::vector<double> values);

}  // namespace adapto
