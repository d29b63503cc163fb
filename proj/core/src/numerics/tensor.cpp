#include "lottery/numerics/tensor.hpp"

#include <cstring>

namespace lottery {

std::string to_string(Dtype dtype) {
  return dtype == Dtype::f32 ? "f32" : "f64";
}

Dtype parse_dtype(const std::string& text) {
  if (text == "f32") {
    return Dtype::f32;
  }
  if (text == "f64") {
    return Dtype::f64;
  }
  throw ArgumentError("unknown dtype '" + text + "' (expected f32 or f64)");
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) {
      out += "x";
    }
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() &&
         (a.size() == 0 || std::memcmp(a.raw(), b.raw(), a.size() * sizeof(T)) == 0);
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() != 2) {
    throw DimensionError("transpose expects a matrix, got " + shape_string(x.shape()));
  }
  Tensor<T> out(Shape{x.dim(1), x.dim(0)});
  for (std::size_t r = 0; r < x.dim(0); ++r) {
    for (std::size_t c = 0; c < x.dim(1); ++c) {
      out.at(c, r) = x.at(r, c);
    }
  }
  return out;
}

template bool bitwise_equal(const Tensor<float>&, const Tensor<float>&);
template bool bitwise_equal(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> transpose(const Tensor<float>&);
template Tensor<double> transpose(const Tensor<double>&);

}  // namespace lottery
