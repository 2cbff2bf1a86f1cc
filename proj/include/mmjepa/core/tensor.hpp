// Copyright 2026 the mmjepa authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "mmjepa/core/common.hpp"

namespace mmjepa {

inline uint64_t next_node_id() {
  static std::atomic<uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

// A dense array participating in a define-by-run reverse-mode graph.
// The graph is the shared-pointer linkage between nodes; it is rebuilt on
// every step and torn down when the loss handle goes out of scope.
// Parameters (is_param) keep their grad buffers across backward calls and
// accumulate additively; intermediates allocate grads lazily per backward.
template <typename T>
class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool is_param = false;
    bool needs_grad = false;
    uint64_t id = next_node_id();
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this node's grad and accumulates into the inputs' grads.
    std::function<void(Node&)> backprop;

    void ensure_grad() {
      if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
  };

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor from(Shape shape, std::vector<T> data) {
    require(numel(shape) == static_cast<int64_t>(data.size()),
            "tensor data size " + std::to_string(data.size()) + " does not match shape " +
                shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    return Tensor(std::move(n));
  }

  static Tensor zeros(Shape shape) {
    const size_t n = static_cast<size_t>(numel(shape));
    return from(std::move(shape), std::vector<T>(n, T(0)));
  }

  static Tensor full(Shape shape, T v) {
    const size_t n = static_cast<size_t>(numel(shape));
    return from(std::move(shape), std::vector<T>(n, v));
  }

  static Tensor scalar(T v) { return from({1}, {v}); }

  static Tensor param(Shape shape, std::vector<T> data) {
    Tensor t = from(std::move(shape), std::move(data));
    t.node_->is_param = true;
    t.node_->needs_grad = true;
    t.node_->ensure_grad();
    return t;
  }

  bool valid() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t size() const { return static_cast<int64_t>(node_->value.size()); }
  int64_t rows() const { return node_->shape.at(0); }
  int64_t cols() const { return node_->shape.at(1); }
  int rank() const { return static_cast<int>(node_->shape.size()); }

  std::vector<T>& value() { return node_->value; }
  const std::vector<T>& value() const { return node_->value; }
  std::vector<T>& grad() { return node_->grad; }
  const std::vector<T>& grad() const { return node_->grad; }

  bool is_param() const { return node_->is_param; }
  bool needs_grad() const { return node_->needs_grad; }
  uint64_t id() const { return node_->id; }

  T item() const {
    require(size() == 1, "item() on non-scalar tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }

  T at(int64_t r, int64_t c) const {
    return node_->value[static_cast<size_t>(r * cols() + c)];
  }

  void zero_grad() {
    node_->grad.assign(node_->value.size(), T(0));
  }

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

namespace detail {

// Post-order over the DAG rooted at `root`, iterative to keep deep graphs off
// the call stack. The order depends only on graph structure, never on node
// ids or addresses, which keeps backward deterministic.
template <typename T>
std::vector<typename Tensor<T>::Node*> topo_order(typename Tensor<T>::Node* root) {
  using Node = typename Tensor<T>::Node;
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    size_t next_input;
  };
  std::vector<Frame> stack;
  if (visited.insert(root).second) stack.push_back({root, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_input < f.node->inputs.size()) {
      Node* in = f.node->inputs[f.next_input++].get();
      if (visited.insert(in).second) stack.push_back({in, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Every parameter reachable from the
// loss receives its accumulated dloss/dparam; fan-out adds contributions.
template <typename T>
void backward(const Tensor<T>& loss) {
  require(loss.size() == 1,
          "backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  auto order = detail::topo_order<T>(loss.node().get());
  for (auto* n : order) {
    if (n->needs_grad && !n->is_param) n->grad.assign(n->value.size(), T(0));
    if (n->needs_grad && n->is_param) n->ensure_grad();
  }
  loss.node()->ensure_grad();
  loss.node()->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    typename Tensor<T>::Node* n = *it;
    if (n->backprop && n->needs_grad) n->backprop(*n);
  }
}

namespace detail {

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                      std::vector<Tensor<T>> inputs,
                      std::function<void(typename Tensor<T>::Node&)> backprop) {
  auto n = std::make_shared<typename Tensor<T>::Node>();
  n->op = op;
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->inputs.reserve(inputs.size());
  for (auto& in : inputs) {
    n->needs_grad = n->needs_grad || in.needs_grad();
    n->inputs.push_back(in.node());
  }
  if (n->needs_grad) n->backprop = std::move(backprop);
  return Tensor<T>(std::move(n));
}

}  // namespace detail

}  // namespace mmjepa
