#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "awfnet/errors.hpp"

namespace awfnet {

using Shape = std::vector<int>;

inline std::int64_t numel_of(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

/// One node of the recorded computation graph. Data is a flat row-major
/// array; grad stays empty until the first accumulation reaches it.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(const Node<T>&)> backward_fn;

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

/// Dense n-dimensional tensor handle. Copies share the underlying node, so a
/// Tensor behaves like a reference to one value of the computation graph.
template <typename T>
class Tensor {
 public:
  using Node = detail::Node<T>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static Tensor filled(Shape shape, T value, bool requires_grad = false) {
    validate_shape(shape);
    auto node = std::make_shared<Node>();
    node->data.assign(static_cast<std::size_t>(numel_of(shape)), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor from_data(Shape shape, std::vector<T> data,
                          bool requires_grad = false) {
    validate_shape(shape);
    if (static_cast<std::int64_t>(data.size()) != numel_of(shape)) {
      throw ShapeError("data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from_data({1}, {v}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t numel() const { return node_->numel(); }
  bool requires_grad() const { return node_->requires_grad; }
  const char* op_name() const { return node_->op; }

  const std::vector<T>& data() const { return node_->data; }
  /// Mutable access to the raw values. Meant for leaf tensors (parameters,
  /// buffers); mutating a tensor an op has already consumed invalidates the
  /// recorded graph.
  std::vector<T>& mutable_data() { return node_->data; }

  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<T>& grad() const {
    if (node_->grad.empty()) throw ContractError("tensor has no gradient");
    return node_->grad;
  }
  std::vector<T>& mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  T item() const {
    if (numel() != 1) {
      throw ContractError("item() requires a scalar tensor, got shape " +
                          shape_str(shape()));
    }
    return node_->data[0];
  }

  /// Row-major accessor: index(b,c,y,x) = ((b*C + c)*H + y)*W + x.
  T at(std::initializer_list<int> idx) const {
    return node_->data[static_cast<std::size_t>(flat_index(idx))];
  }

  std::int64_t flat_index(std::initializer_list<int> idx) const {
    const Shape& s = node_->shape;
    if (idx.size() != s.size()) {
      throw ContractError("index rank " + std::to_string(idx.size()) +
                          " does not match tensor rank " +
                          std::to_string(s.size()));
    }
    std::int64_t flat = 0;
    std::size_t k = 0;
    for (int i : idx) {
      if (i < 0 || i >= s[k]) {
        throw ContractError("index out of bounds at axis " + std::to_string(k));
      }
      flat = flat * s[k] + i;
      ++k;
    }
    return flat;
  }

  /// Reverse-mode accumulation from a scalar. Non-leaf gradients are reset
  /// first, so repeated calls accumulate additively into leaves only.
  void backward() const {
    if (numel() != 1) {
      throw ContractError("backward() requires a scalar loss, got shape " +
                          shape_str(shape()));
    }
    std::vector<Node*> order = topo_order();
    for (Node* n : order) {
      if (!n->parents.empty()) n->grad.clear();
    }
    node_->ensure_grad()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
  }

  std::shared_ptr<Node> node() const { return node_; }

  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  static void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("empty shape");
    for (int d : shape) {
      if (d <= 0) throw ShapeError("non-positive dimension in " + shape_str(shape));
    }
  }

  // Iterative post-order DFS over parents; deterministic for a fixed graph.
  std::vector<Node*> topo_order() const {
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node* p = n->parents[next++].get();
        if (visited.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    return order;
  }

  std::shared_ptr<Node> node_;
};

namespace detail {

template <typename T>
inline void check_finite(const char* op, const std::vector<T>& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw NumericsError(op, "produced non-finite value at flat index " +
                                  std::to_string(i));
    }
  }
}

/// Record an op result. Parents and the backward closure are kept only when
/// some parent requires grad; otherwise the graph is pruned at this node.
template <typename T>
Tensor<T> make_op(const char* op, Shape shape, std::vector<T> data,
                  std::vector<Tensor<T>> parents,
                  std::function<void(const Node<T>&)> backward_fn) {
  check_finite(op, data);
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  node->requires_grad = needs;
  if (needs) {
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
inline void accumulate(const std::shared_ptr<Node<T>>& target,
                       const std::vector<T>& contribution) {
  if (!target->requires_grad) return;
  auto& g = target->ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += contribution[i];
}

}  // namespace detail
}  // namespace awfnet
