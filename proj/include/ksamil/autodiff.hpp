#pragma once

// Define-by-run reverse-mode differentiation.  A Graph is an append-only list
// of nodes; every operation appends one node whose parents were appended
// earlier, so reverse append order is a valid topological order for backward.

#include "ksamil/parameter.hpp"
#include "ksamil/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <initializer_list>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ksa {

using NodeId = std::size_t;

template <typename Scalar>
class Graph;

/// Handle to a node of a Graph.  Cheap to copy; valid while the graph lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Graph<Scalar>* graph, NodeId id) : graph_(graph), id_(id) {}

  Graph<Scalar>& graph() const { return *graph_; }
  NodeId id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor<Scalar>& value() const { return graph_->value(id_); }
  const Tensor<Scalar>& grad() const { return graph_->grad(id_); }
  const Shape& shape() const { return value().shape(); }
  Index size() const { return value().size(); }
  bool requires_grad() const { return graph_->requires_grad(id_); }

 private:
  Graph<Scalar>* graph_ = nullptr;
  NodeId id_ = 0;
};

template <typename Scalar>
class Graph {
 public:
  using T = Tensor<Scalar>;
  /// Receives the gradient of the node's output and adds contributions into
  /// the parents' gradient buffers.
  using BackwardFn = std::function<void(Graph&, const T&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<Scalar> constant(T value) { return leaf("constant", std::move(value), false, nullptr); }

  /// Leaf that records its own gradient (read back through Var::grad()).
  Var<Scalar> variable(T value) { return leaf("variable", std::move(value), true, nullptr); }

  /// Leaf bound to a parameter; backward accumulates into Parameter::grad.
  /// Binding the same parameter twice returns the same node.
  Var<Scalar> param(Parameter<Scalar>& p) {
    if (auto it = bound_.find(&p); it != bound_.end()) return {this, it->second};
    auto v = leaf("parameter", p.value, p.requires_grad, &p);
    bound_.emplace(&p, v.id());
    return v;
  }

  Var<Scalar> record(const char* op, T value, std::initializer_list<Var<Scalar>> parents,
                     BackwardFn backward) {
    bool needs_grad = false;
    for (const auto& parent : parents) {
      if (&parent.graph() != this) throw std::invalid_argument("operands belong to different graphs");
      if (parent.requires_grad()) needs_grad = true;
    }
    return push(op, std::move(value), needs_grad, needs_grad ? std::move(backward) : BackwardFn{},
                nullptr);
  }

  const T& value(NodeId id) const { return nodes_.at(id).value; }

  /// Gradient of the last backward() target with respect to this node.
  const T& grad(NodeId id) const { return nodes_.at(id).grad; }

  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }

  const char* op_name(NodeId id) const { return nodes_.at(id).op; }

  /// Mutable gradient buffer of a parent, allocated as zeros on first use.
  T& grad_buffer(NodeId id) {
    auto& node = nodes_[id];
    if (node.grad.size() != node.value.size() || node.grad.empty()) {
      node.grad = T::zeros(node.value.shape());
    }
    return node.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  /// Propagates d(loss)/d(node) to every reachable node, visiting each node
  /// once in reverse append order, then adds leaf gradients into their
  /// bound parameters.
  void backward(const Var<Scalar>& loss) {
    if (loss.size() != 1) {
      throw ShapeError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
    }
    for (auto& node : nodes_) node.grad = T{};
    grad_buffer(loss.id()).array().setConstant(Scalar(1));

    for (std::size_t k = nodes_.size(); k-- > 0;) {
      auto& node = nodes_[k];
      if (!node.requires_grad || node.grad.empty() || !node.backward) continue;
      // Parents precede this node, so the closure never touches node.grad.
      node.backward(*this, node.grad);
    }
    for (auto& node : nodes_) {
      if (node.param == nullptr || !node.requires_grad) continue;
      if (node.grad.empty()) node.grad = T::zeros(node.value.shape());
      if (!node.grad.all_finite()) {
        throw NumericError("non-finite gradient for parameter " + node.param->name);
      }
      node.param->accumulate(node.grad);
    }
  }

 private:
  struct Node {
    const char* op;
    T value;
    T grad;
    bool requires_grad;
    BackwardFn backward;
    Parameter<Scalar>* param;
  };

  Var<Scalar> leaf(const char* op, T value, bool requires_grad, Parameter<Scalar>* p) {
    return push(op, std::move(value), requires_grad, BackwardFn{}, p);
  }

  Var<Scalar> push(const char* op, T value, bool requires_grad, BackwardFn backward,
                   Parameter<Scalar>* p) {
    if (!value.all_finite()) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
    nodes_.push_back(Node{op, std::move(value), T{}, requires_grad, std::move(backward), p});
    return {this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Scalar>*, NodeId> bound_;
};

}  // namespace ksa
