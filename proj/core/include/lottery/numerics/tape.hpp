#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lottery/numerics/tensor.hpp"

namespace lottery::ad {

template <typename T>
class Tape;

// Handle to a node on a tape. Cheap to copy; only meaningful while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  const Tensor<T>& grad() const;

 private:
  Tape<T>* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Reverse-mode tape. Records are appended in evaluation order, so every
/// record's inputs precede it; backward walks the records in reverse exactly
/// once, after which the tape is dead until clear().
template <typename T>
class Tape {
 public:
  // Receives the gradient of the node's output and the tape (to accumulate into inputs).
  using BackwardFn = std::function<void(const Tensor<T>& out_grad, Tape& tape)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that receives a gradient. The tensor is borrowed and must outlive the tape.
  Var<T> leaf(const Tensor<T>& value);
  // Value that never receives a gradient; owned by the tape.
  Var<T> constant(Tensor<T> value);

  // Used by op implementations.
  Var<T> push(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward);
  bool requires_grad(Var<T> v) const { return nodes_[v.id()].requires_grad; }
  bool recording() const noexcept { return record_; }
  // Gradient buffer of a node, zero-allocated on first touch.
  Tensor<T>& grad_buffer(std::uint32_t id);

  const Tensor<T>& value(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.borrowed != nullptr ? *n.borrowed : n.owned;
  }
  const Tensor<T>& grad(std::uint32_t id) const;

  void backward(Var<T> loss);
  bool alive() const noexcept { return alive_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    const Tensor<T>* borrowed = nullptr;
    Tensor<T> owned;
    Tensor<T> grad;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  std::vector<Node> nodes_;
  bool record_;
  bool alive_ = true;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
const Tensor<T>& Var<T>::grad() const {
  return tape_->grad(id_);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace lottery::ad
