#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "lottery/errors.hpp"

namespace lottery {

using Shape = std::vector<std::size_t>;

enum class Dtype : std::uint8_t { f32 = 1, f64 = 2 };

template <typename T>
constexpr Dtype dtype_of();
template <>
constexpr Dtype dtype_of<float>() {
  return Dtype::f32;
}
template <>
constexpr Dtype dtype_of<double>() {
  return Dtype::f64;
}

// 64-byte aligned storage so vectorized kernels see the same alignment for the
// same shapes in every run, which keeps results bit-reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

std::string to_string(Dtype dtype);
Dtype parse_dtype(const std::string& text);

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array. Gradients are not stored here; they live on the tape
// node that wraps a tensor during a forward/backward build.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_size(shape_), fill);
  }
  Tensor(Shape shape, std::span<const T> data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    validate_shape();
    if (data_.size() != shape_size(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  Tensor(Shape shape, const std::vector<T>& data)
      : Tensor(std::move(shape), std::span<const T>(data)) {}

  static Tensor scalar(T value) {
    const T v[1] = {value};
    return Tensor(Shape{1}, std::span<const T>(v));
  }
  static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows) {
    std::vector<T> flat;
    std::size_t cols = rows.size() == 0 ? 0 : rows.begin()->size();
    for (const auto& row : rows) {
      if (row.size() != cols) {
        throw DimensionError("ragged matrix literal");
      }
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return Tensor(Shape{rows.size(), cols}, std::span<const T>(flat));
  }
  static Tensor vector(std::initializer_list<T> values) {
    return Tensor(Shape{values.size()}, std::span<const T>(values.begin(), values.size()));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Rank-2 convenience; rank-1 tensors are treated as a single row.
  std::size_t rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  T& at(std::size_t r, std::size_t c) noexcept { return data_[r * shape_.back() + c]; }
  const T& at(std::size_t r, std::size_t c) const noexcept { return data_[r * shape_.back() + c]; }
  T item() const {
    if (data_.size() != 1) {
      throw DimensionError("item() on tensor of shape " + shape_string(shape_));
    }
    return data_[0];
  }

  void fill(T value) { data_.assign(data_.size(), value); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void validate_shape() const {
    for (std::size_t d : shape_) {
      if (d == 0) {
        throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape_));
      }
    }
  }

  Shape shape_;
  AlignedVector<T> data_;
};

// Bitwise equality, distinguishing -0.0 from 0.0 and treating equal NaN
// payloads as equal. Used by serialization and reproducibility checks.
template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

}  // namespace lottery
