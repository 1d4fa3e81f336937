// svkit/tensor.hpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef SVKIT_TENSOR_HPP_
#define SVKIT_TENSOR_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "svkit/common.hpp"

namespace sv {

// When set, every op output is scanned for NaN/Inf.  Cheap enough for
// tests, off by default in training.
inline bool& check_finite_flag() {
  static bool flag = false;
  return flag;
}

template <typename T>
struct TensorNode {
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;         // lazily allocated during backward
  bool requires_grad = false;  // trainable leaf
  bool needs_grad = false;     // lies on a path to a trainable leaf
  bool value_moved = false;    // value buffer stolen by a downstream op
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_op;

  std::int64_t size() const {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }

  // Zero-filled grad buffer, allocated on first contribution.
  std::vector<T>& acc_grad() {
    if (grad.empty()) grad.assign(static_cast<size_t>(size()), T(0));
    return grad;
  }
};

// Dense n-dimensional array participating in reverse-mode autodiff.
// Copies share the underlying node (shallow handle semantics).
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    return from_data(std::move(shape), {}, requires_grad);
  }

  static Tensor full(std::vector<int> shape, T v, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.data().begin(), t.data().end(), v);
    return t;
  }

  static Tensor from_data(std::vector<int> shape, std::vector<T> data,
                          bool requires_grad = false) {
    auto n = std::make_shared<TensorNode<T>>();
    n->shape = std::move(shape);
    for (int d : n->shape)
      if (d <= 0) throw DimensionError("tensor dimension must be positive");
    if (data.empty()) {
      n->value.assign(static_cast<size_t>(n->size()), T(0));
    } else {
      if (static_cast<std::int64_t>(data.size()) != n->size())
        throw DimensionError("data length does not match shape");
      n->value = std::move(data);
    }
    n->requires_grad = requires_grad;
    n->needs_grad = requires_grad;
    n->id = next_id();
    Tensor t;
    t.n_ = std::move(n);
    return t;
  }

  static Tensor scalar(T v) { return from_data({1}, {v}); }

  bool defined() const { return n_ != nullptr; }
  const std::vector<int>& shape() const { return n_->shape; }
  int rank() const { return static_cast<int>(n_->shape.size()); }
  int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
  std::int64_t size() const { return n_->size(); }
  bool requires_grad() const { return n_->requires_grad; }
  bool needs_grad() const { return n_->needs_grad; }

  std::vector<T>& data() {
    if (n_->value_moved)
      throw NumericError("tensor value was consumed by an in-place op");
    return n_->value;
  }
  const std::vector<T>& data() const {
    if (n_->value_moved)
      throw NumericError("tensor value was consumed by an in-place op");
    return n_->value;
  }
  std::vector<T>& grad() { return n_->acc_grad(); }
  const std::vector<T>& grad() const { return n_->grad; }
  bool has_grad() const { return !n_->grad.empty(); }

  T item() const {
    if (size() != 1) throw DimensionError("item() requires a scalar tensor");
    return data()[0];
  }

  void zero_grad() {
    if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
  }

  std::shared_ptr<TensorNode<T>> node() const { return n_; }

  // Reverse-mode sweep from a scalar output.  Operations run in exact
  // reverse of forward execution order (node ids are the forward clock).
  // Grad buffers of interior nodes are released as soon as they have been
  // propagated; trainable leaves keep theirs for the optimizer.
  void backward() {
    if (size() != 1) throw DimensionError("backward() requires a scalar loss");
    std::vector<TensorNode<T>*> nodes;
    std::unordered_set<TensorNode<T>*> seen;
    std::vector<TensorNode<T>*> stack{n_.get()};
    seen.insert(n_.get());
    while (!stack.empty()) {
      TensorNode<T>* cur = stack.back();
      stack.pop_back();
      nodes.push_back(cur);
      for (auto& p : cur->parents)
        if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const TensorNode<T>* a, const TensorNode<T>* b) {
                return a->id > b->id;
              });
    n_->acc_grad()[0] += T(1);
    for (TensorNode<T>* node : nodes) {
      if (node->grad.empty()) continue;  // unreached by any contribution
      if (node->backward_op) node->backward_op(*node);
      if (!node->requires_grad) {
        node->grad.clear();
        node->grad.shrink_to_fit();
      }
    }
  }

  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
  }

 private:
  std::shared_ptr<TensorNode<T>> n_;
};

namespace detail {

template <typename T>
void check_finite(const std::vector<T>& v, const char* what) {
  if (!check_finite_flag()) return;
  for (T x : v)
    if (!std::isfinite(static_cast<double>(x)))
      throw NumericError(std::string("non-finite value in ") + what);
}

// Builds an op result node.  Parents and the backward closure are recorded
// only when some input needs gradients; pure eval forwards carry no graph,
// so upstream activations are freed as soon as handles go out of scope.
template <typename T>
Tensor<T> make_op(std::vector<int> shape, std::vector<T> value,
                  std::vector<Tensor<T>> parents,
                  std::function<void(TensorNode<T>&)> backward_op,
                  const char* name) {
  check_finite(value, name);
  Tensor<T> out = Tensor<T>::from_data(std::move(shape), std::move(value));
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.needs_grad();
  if (needs) {
    auto n = out.node();
    n->needs_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward_op = std::move(backward_op);
  }
  return out;
}

// Steals the value buffer of `from` for an elementwise op whose backward
// rule only needs its own output.  Only legal when no other consumer reads
// `from`'s value; the model builder guarantees this.
template <typename T>
std::vector<T> take_value(Tensor<T>& from) {
  auto n = from.node();
  if (n->value_moved) throw NumericError("tensor value already consumed");
  std::vector<T> v = std::move(n->value);
  n->value.clear();
  n->value_moved = true;
  return v;
}

}  // namespace detail

}  // namespace sv

#endif  // SVKIT_TENSOR_HPP_
