// SPDX-License-Identifier: Apache-2.0
//
// Define-by-run reverse-mode automatic differentiation over dense double
// tensors. Every operation evaluates eagerly and appends a node to its Graph.
// Backward rules are written in terms of the same operations, so calling
// backward with build_graph=true yields gradients that are themselves graph
// nodes and can be differentiated again.
#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <string_view>
#include <vector>

#include "lsx/tensor.hpp"

namespace lsx::ad {

enum class OpKind {
  leaf,
  add,
  sub,
  mul,
  scale,
  matmul,
  transpose,
  conv2d,
  conv2d_grad_input,
  conv2d_grad_weight,
  relu,
  sigmoid,
  avgpool2d,
  avgpool2d_grad,
  reshape,
  sum,
  broadcast,
  mean,
  max_over_axis,
  softmax,
  softmax_cross_entropy,
  mse,
  gather_rows,
  scatter_rows,
};

std::string_view op_name(OpKind kind);

using NodeId = std::size_t;

struct OpAttrs {
  double scalar = 0.0;
  std::vector<std::size_t> dims;
  std::vector<std::size_t> index;
  Shape shape;
};

struct Node {
  OpKind kind = OpKind::leaf;
  std::vector<NodeId> inputs;
  OpAttrs attrs;
  Tensor value;
  bool requires_grad = false;
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  NodeId id() const { return id_; }
  Graph& graph() const { return *graph_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Node& node(NodeId id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool on) { grad_enabled_ = on; }

  // Re-evaluates every non-leaf node up to `root` from its recorded inputs and
  // returns the value at root. Throws if a replayed value differs from the
  // value recorded when the node was built.
  Tensor forward(NodeId root);

  // Gradients of the scalar `root` with respect to each node in `wrt`, in
  // order. Nodes that do not influence root get a zero tensor of their shape.
  // With build_graph the results are differentiable graph nodes; otherwise
  // they are constants.
  std::vector<Var> backward(Var root, std::span<const Var> wrt, bool build_graph = false);

  Var apply(OpKind kind, std::vector<Var> inputs, OpAttrs attrs = {});

 private:
  // Deque so values and shapes handed out by reference survive new nodes.
  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
};

// Disables gradient recording on a graph for the guard's lifetime.
class NoGradGuard {
 public:
  explicit NoGradGuard(Graph& g) : graph_(g), previous_(g.grad_enabled()) { g.set_grad_enabled(false); }
  ~NoGradGuard() { graph_.set_grad_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Graph& graph_;
  bool previous_;
};

// Elementwise; operands must have identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

// [m,k] x [k,n] -> [m,n]
Var matmul(Var a, Var b);
Var transpose(Var a);

// Stride 1, no padding. x: [N,C,H,W], w: [F,C,kh,kw] -> [N,F,H-kh+1,W-kw+1].
Var conv2d(Var x, Var w);
// Adjoint of conv2d in x: g: [N,F,Ho,Wo], w: [F,C,kh,kw] -> [N,C,height,width].
Var conv2d_grad_input(Var g, Var w, std::size_t height, std::size_t width);
// Adjoint of conv2d in w: x: [N,C,H,W], g: [N,F,Ho,Wo] -> [F,C,kh,kw].
Var conv2d_grad_weight(Var x, Var g, std::size_t kh, std::size_t kw);

Var relu(Var x);
Var sigmoid(Var x);

// Non-overlapping k x k average pooling over the two trailing axes.
Var avgpool2d(Var x, std::size_t k);
// Adjoint of avgpool2d: spreads each value uniformly over its k x k window.
Var avgpool2d_grad(Var g, std::size_t k);

Var reshape(Var x, Shape shape);

// View x as [outer, mid, inner] and sum over outer and inner -> `out_shape`
// (numel == mid).
Var sum_axes(Var x, std::size_t outer, std::size_t mid, std::size_t inner, Shape out_shape);
// Adjoint of sum_axes: v (numel == mid) -> `out_shape` viewed [outer, mid, inner].
Var broadcast(Var v, Shape out_shape, std::size_t outer, std::size_t inner);

Var sum(Var x);   // -> scalar
Var mean(Var x);  // -> scalar
// Row sums of a [rows, cols] tensor -> [rows].
Var sum_rows(Var x);

// Maximum over the last axis.
Var max_over_axis(Var x);
// Softmax over the last axis of a [rows, cols] tensor.
Var softmax(Var x);
// Mean over rows of -log softmax(logits)[label]. logits: [N,K].
Var softmax_cross_entropy(Var logits, std::span<const int> labels);
// Mean of squared differences over all elements.
Var mse(Var a, Var b);

// [N,K] -> [N]: picks x[i, index[i]].
Var gather_rows(Var x, std::span<const int> index);
// Adjoint of gather_rows: [N] -> [N,K] with v[i] at column index[i].
Var scatter_rows(Var v, std::span<const int> index, std::size_t cols);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace lsx::ad
