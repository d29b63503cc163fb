#include "lottery/numerics/tape.hpp"

namespace lottery::ad {

template <typename T>
Var<T> Tape<T>::leaf(const Tensor<T>& value) {
  if (!alive_) {
    throw StateError("tape already consumed by backward; call clear() first");
  }
  Node n;
  n.borrowed = &value;
  n.requires_grad = record_;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var<T>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  if (!alive_) {
    throw StateError("tape already consumed by backward; call clear() first");
  }
  Node n;
  n.owned = std::move(value);
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var<T>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <typename T>
Var<T> Tape<T>::push(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward) {
  if (!alive_) {
    throw StateError("tape already consumed by backward; call clear() first");
  }
  bool needs = false;
  for (const Var<T>& in : inputs) {
    if (&in.tape() != this) {
      throw StateError("op mixes variables from different tapes");
    }
    needs = needs || nodes_[in.id()].requires_grad;
  }
  Node n;
  n.owned = std::move(value);
  n.requires_grad = record_ && needs;
  if (n.requires_grad) {
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var<T>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    n.grad = Tensor<T>(value(id).shape());
  }
  return n.grad;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(std::uint32_t id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.empty()) {
    // Never reached by backward: the gradient is identically zero.
    const_cast<Node&>(n).grad = Tensor<T>(value(id).shape());
  }
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (!alive_) {
    throw StateError("backward called on a dead tape");
  }
  if (!record_) {
    throw StateError("backward called on a non-recording tape");
  }
  if (&loss.tape() != this) {
    throw StateError("loss does not belong to this tape");
  }
  if (value(loss.id()).size() != 1) {
    throw DimensionError("backward expects a scalar loss, got shape " +
                         shape_string(value(loss.id()).shape()));
  }
  alive_ = false;
  grad_buffer(loss.id()).fill(T{1});
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.backward && !n.grad.empty()) {
      n.backward(n.grad, *this);
    }
    if (!n.is_leaf) {
      // Intermediate gradients and saved state are no longer needed.
      n.backward = nullptr;
      n.grad = Tensor<T>();
    }
  }
}

template <typename T>
void Tape<T>::clear() {
  nodes_.clear();
  alive_ = true;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace lottery::ad
