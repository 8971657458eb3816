#pragma once

#include <cstddef>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace arithlm {

#ifdef ARITHLM_REAL_DOUBLE
using real = double;
#else
using real = float;
#endif

using Shape = std::vector<std::size_t>;

/// Cache-line aligned storage, so vectorized kernels split work the same way
/// on every run regardless of where the heap places a buffer.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using Storage = std::vector<real, AlignedAllocator<real>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of `real` (float32 unless ARITHLM_REAL_DOUBLE).
///
/// A Tensor is a shared handle: copies alias the same storage, which is what
/// lets the tape keep operands alive and lets a hooked model share parameters
/// with its base. Use clone() for an independent copy.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, real fill = 0.0f);
  Tensor(Shape shape, std::vector<real> values);

  static Tensor scalar(real value);

  const Shape& shape() const { return impl_->shape; }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->data.size(); }
  /// Leading extent; for a 2-D tensor this is the row count.
  std::size_t rows() const;
  /// Product of all trailing extents.
  std::size_t cols() const;

  std::span<real> data() { return impl_->data; }
  std::span<const real> data() const { return impl_->data; }
  real* ptr() { return impl_->data.data(); }
  const real* ptr() const { return impl_->data.data(); }
  real item() const;
  real& operator[](std::size_t i) { return impl_->data[i]; }
  real operator[](std::size_t i) const { return impl_->data[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag);
  bool has_grad() const { return !impl_->grad.empty(); }
  // Gradient storage belongs to the shared node, so const handles may
  // accumulate into it during backward.
  std::span<real> grad() const;
  real* grad_ptr() const { return impl_->grad.data(); }
  void zero_grad();
  /// Allocates a zero gradient buffer if none exists.
  void ensure_grad();

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    Storage data;
    Storage grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

}  // namespace arithlm
