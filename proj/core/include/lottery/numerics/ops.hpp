#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lottery/numerics/tape.hpp"

namespace lottery::ad {

// Contiguous run of rows [offset, offset + length) forming one sequence.
struct Segment {
  std::size_t offset = 0;
  std::size_t length = 0;
};

// a[M x K] * b[K x N]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);
// a[M x K] * b[N x K]^T
template <typename T>
Var<T> matmul_transposed(Var<T> a, Var<T> b);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);
// x[M x N] + bias[N] broadcast over rows.
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> a, T factor);
template <typename T>
Var<T> sum(Var<T> a);

// Zeroes positions where keep[i] == 0; gradient flows only to kept positions.
// `keep` is borrowed and must outlive backward.
template <typename T>
Var<T> apply_mask(Var<T> w, std::span<const std::uint8_t> keep);

// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
template <typename T>
Var<T> gelu(Var<T> x);
template <typename T>
T gelu_value(T x);

// Softmax along `axis` with max subtraction.
template <typename T>
Var<T> softmax(Var<T> x, std::size_t axis);

// Row-wise layer norm over the last dimension of x[M x N]; biased variance.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps);

// Rows of table[V x d] selected by ids. Out-of-range ids raise IndexError.
template <typename T>
Var<T> embedding_lookup(Var<T> table, std::span<const std::uint32_t> ids);
template <typename T>
Var<T> gather_rows(Var<T> x, std::span<const std::size_t> rows);

// Multi-head scaled dot-product self-attention, computed independently within
// each segment (no attention across segment boundaries). q, k, v are [N x d].
template <typename T>
Var<T> self_attention(Var<T> q, Var<T> k, Var<T> v, std::span<const Segment> segments,
                      std::size_t heads);

// Mean negative log-likelihood of targets under row-wise softmax(logits).
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const std::uint32_t> targets);
// Mean squared error against a constant target of the same size.
template <typename T>
Var<T> mse(Var<T> pred, std::span<const T> target);

}  // namespace lottery::ad
