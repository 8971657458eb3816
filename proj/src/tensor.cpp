#include "arithlm/tensor.hpp"

#include <algorithm>

#include "arithlm/errors.hpp"

namespace arithlm {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) {
    n *= extent;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) {
      out += "x";
    }
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor() : impl_(std::make_shared<Impl>()) {}

Tensor::Tensor(Shape shape, real fill) : impl_(std::make_shared<Impl>()) {
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<real> values) : impl_(std::make_shared<Impl>()) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data.assign(values.begin(), values.end());
}

Tensor Tensor::scalar(real value) { return Tensor(Shape{1}, std::vector<real>{value}); }

std::size_t Tensor::rows() const { return impl_->shape.empty() ? 1 : impl_->shape.front(); }

std::size_t Tensor::cols() const {
  const auto& s = impl_->shape;
  if (s.size() <= 1) {
    return 1;
  }
  std::size_t n = 1;
  for (std::size_t i = 1; i < s.size(); ++i) {
    n *= s[i];
  }
  return n;
}

real Tensor::item() const {
  if (impl_->data.size() != 1) {
    throw ContractError("item() on tensor of shape " + shape_str(impl_->shape));
  }
  return impl_->data.front();
}

void Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  if (flag) {
    ensure_grad();
  }
}

std::span<real> Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() { std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f); }

void Tensor::ensure_grad() {
  if (impl_->grad.size() != impl_->data.size()) {
    impl_->grad.assign(impl_->data.size(), 0.0f);
  }
}

Tensor Tensor::clone() const {
  Tensor out;
  out.impl_->shape = impl_->shape;
  out.impl_->data = impl_->data;
  out.impl_->requires_grad = impl_->requires_grad;
  out.impl_->grad = impl_->grad;
  return out;
}

}  // namespace arithlm
