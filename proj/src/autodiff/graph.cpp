// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <string>

#include "kernels.hpp"

namespace lsx::ad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::matmul: return "matmul";
    case OpKind::transpose: return "transpose";
    case OpKind::conv2d: return "conv2d";
    case OpKind::conv2d_grad_input: return "conv2d_grad_input";
    case OpKind::conv2d_grad_weight: return "conv2d_grad_weight";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::avgpool2d: return "avgpool2d";
    case OpKind::avgpool2d_grad: return "avgpool2d_grad";
    case OpKind::reshape: return "reshape";
    case OpKind::sum: return "sum";
    case OpKind::broadcast: return "broadcast";
    case OpKind::mean: return "mean";
    case OpKind::max_over_axis: return "max_over_axis";
    case OpKind::softmax: return "softmax";
    case OpKind::softmax_cross_entropy: return "softmax_cross_entropy";
    case OpKind::mse: return "mse";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::scatter_rows: return "scatter_rows";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph_->node(id_).value; }
bool Var::requires_grad() const { return graph_->node(id_).requires_grad; }

Var Graph::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) {
    throw NonFiniteError("node " + std::to_string(nodes_.size()) + " (leaf): non-finite value");
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

namespace {

std::string where(NodeId id, OpKind kind) {
  return "node " + std::to_string(id) + " (" + std::string(op_name(kind)) + "): ";
}

Tensor evaluate(const std::deque<Node>& nodes, NodeId id, OpKind kind, const std::vector<NodeId>& inputs,
                const OpAttrs& attrs) {
  std::vector<const Tensor*> vals;
  vals.reserve(inputs.size());
  for (NodeId i : inputs) vals.push_back(&nodes[i].value);
  Tensor out;
  try {
    out = detail::compute(kind, vals, attrs);
  } catch (const ShapeError& e) {
    throw ShapeError(where(id, kind) + e.what());
  } catch (const std::out_of_range&) {
    throw ShapeError(where(id, kind) + "missing attribute");
  }
  if (!out.all_finite()) throw NonFiniteError(where(id, kind) + "non-finite value");
  return out;
}

}  // namespace

Var Graph::apply(OpKind kind, std::vector<Var> inputs, OpAttrs attrs) {
  const NodeId id = nodes_.size();
  if (kind == OpKind::leaf) throw ShapeError(where(id, kind) + "use Graph::leaf");
  std::vector<NodeId> ids;
  ids.reserve(inputs.size());
  bool rg = false;
  for (const Var& v : inputs) {
    if (!v.valid() || &v.graph() != this || v.id() >= id) {
      throw ShapeError(where(id, kind) + "input does not belong to this graph");
    }
    ids.push_back(v.id());
    rg = rg || nodes_[v.id()].requires_grad;
  }
  Node n;
  n.value = evaluate(nodes_, id, kind, ids, attrs);
  n.kind = kind;
  n.inputs = std::move(ids);
  n.attrs = std::move(attrs);
  n.requires_grad = rg && grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var(this, id);
}

Tensor Graph::forward(NodeId root) {
  if (root >= nodes_.size()) throw ShapeError("forward: root " + std::to_string(root) + " not in graph");
  for (NodeId id = 0; id <= root; ++id) {
    const Node& n = nodes_[id];
    if (n.kind == OpKind::leaf) continue;
    Tensor v = evaluate(nodes_, id, n.kind, n.inputs, n.attrs);
    if (v != n.value) throw ShapeError(where(id, n.kind) + "replay differs from recorded value");
  }
  return nodes_[root].value;
}

std::vector<Var> Graph::backward(Var root, std::span<const Var> wrt, bool build_graph) {
  if (!root.valid() || &root.graph() != this) throw ShapeError("backward: root does not belong to this graph");
  const NodeId r = root.id();
  if (nodes_[r].value.numel() != 1) {
    throw ShapeError("backward: root " + where(r, nodes_[r].kind) + "is not scalar, shape " +
                     shape_str(nodes_[r].value.shape()));
  }
  for (const Var& w : wrt)
    if (!w.valid() || &w.graph() != this) throw ShapeError("backward: wrt node does not belong to this graph");

  // needed[i]: some wrt node is reachable from i through inputs.
  std::vector<bool> needed(r + 1, false);
  for (const Var& w : wrt)
    if (w.id() <= r) needed[w.id()] = true;
  for (NodeId id = 0; id <= r; ++id) {
    if (needed[id]) continue;
    const Node& n = nodes_[id];
    if (!n.requires_grad) continue;
    needed[id] = std::any_of(n.inputs.begin(), n.inputs.end(), [&](NodeId i) { return needed[i]; });
  }

  const bool previous = grad_enabled_;
  grad_enabled_ = build_graph;
  std::vector<Var> grads(r + 1);
  try {
    grads[r] = leaf(Tensor(nodes_[r].value.shape(), 1.0));
    for (NodeId id = r + 1; id-- > 0;) {
      if (!grads[id].valid() || !needed[id]) continue;
      const Node& n = nodes_[id];
      if (n.kind == OpKind::leaf || !n.requires_grad) continue;
      std::vector<bool> want(n.inputs.size());
      for (std::size_t i = 0; i < n.inputs.size(); ++i) want[i] = needed[n.inputs[i]];
      const std::vector<NodeId> inputs = n.inputs;
      std::vector<Var> parts = detail::backward_rule(*this, id, grads[id], want);
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!parts[i].valid()) continue;
        Var& acc = grads[inputs[i]];
        acc = acc.valid() ? add(acc, parts[i]) : parts[i];
      }
    }
  } catch (...) {
    grad_enabled_ = previous;
    throw;
  }
  grad_enabled_ = previous;

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id() <= r && grads[w.id()].valid()) {
      out.push_back(grads[w.id()]);
    } else {
      out.push_back(constant(Tensor(nodes_[w.id()].value.shape(), 0.0)));
    }
  }
  return out;
}

namespace {

Graph& graph_of(const Var& v) {
  if (!v.valid()) throw ShapeError("operation on an empty Var");
  return v.graph();
}

std::vector<std::size_t> to_index(std::span<const int> idx) {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  for (int i : idx) {
    if (i < 0) throw ShapeError("negative index " + std::to_string(i));
    out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

}  // namespace

Var add(Var a, Var b) { return graph_of(a).apply(OpKind::add, {a, b}); }
Var sub(Var a, Var b) { return graph_of(a).apply(OpKind::sub, {a, b}); }
Var mul(Var a, Var b) { return graph_of(a).apply(OpKind::mul, {a, b}); }

Var scale(Var a, double factor) {
  OpAttrs at;
  at.scalar = factor;
  return graph_of(a).apply(OpKind::scale, {a}, std::move(at));
}

Var matmul(Var a, Var b) { return graph_of(a).apply(OpKind::matmul, {a, b}); }
Var transpose(Var a) { return graph_of(a).apply(OpKind::transpose, {a}); }

Var conv2d(Var x, Var w) { return graph_of(x).apply(OpKind::conv2d, {x, w}); }

Var conv2d_grad_input(Var g, Var w, std::size_t height, std::size_t width) {
  OpAttrs at;
  at.dims = {height, width};
  return graph_of(g).apply(OpKind::conv2d_grad_input, {g, w}, std::move(at));
}

Var conv2d_grad_weight(Var x, Var g, std::size_t kh, std::size_t kw) {
  OpAttrs at;
  at.dims = {kh, kw};
  return graph_of(x).apply(OpKind::conv2d_grad_weight, {x, g}, std::move(at));
}

Var relu(Var x) { return graph_of(x).apply(OpKind::relu, {x}); }
Var sigmoid(Var x) { return graph_of(x).apply(OpKind::sigmoid, {x}); }

Var avgpool2d(Var x, std::size_t k) {
  OpAttrs at;
  at.dims = {k};
  return graph_of(x).apply(OpKind::avgpool2d, {x}, std::move(at));
}

Var avgpool2d_grad(Var g, std::size_t k) {
  OpAttrs at;
  at.dims = {k};
  return graph_of(g).apply(OpKind::avgpool2d_grad, {g}, std::move(at));
}

Var reshape(Var x, Shape shape) {
  OpAttrs at;
  at.shape = std::move(shape);
  return graph_of(x).apply(OpKind::reshape, {x}, std::move(at));
}

Var sum_axes(Var x, std::size_t outer, std::size_t mid, std::size_t inner, Shape out_shape) {
  OpAttrs at;
  at.dims = {outer, mid, inner};
  at.shape = std::move(out_shape);
  return graph_of(x).apply(OpKind::sum, {x}, std::move(at));
}

Var broadcast(Var v, Shape out_shape, std::size_t outer, std::size_t inner) {
  OpAttrs at;
  at.dims = {outer, inner};
  at.shape = std::move(out_shape);
  return graph_of(v).apply(OpKind::broadcast, {v}, std::move(at));
}

Var sum(Var x) {
  const std::size_t n = graph_of(x).node(x.id()).value.numel();
  return sum_axes(x, 1, 1, n, Shape{});
}

Var mean(Var x) { return graph_of(x).apply(OpKind::mean, {x}); }

Var sum_rows(Var x) {
  const Shape s = graph_of(x).node(x.id()).value.shape();
  if (s.size() != 2) throw ShapeError("sum_rows needs a rank-2 tensor, got " + shape_str(s));
  return sum_axes(x, 1, s[0], s[1], Shape{s[0]});
}

Var max_over_axis(Var x) { return graph_of(x).apply(OpKind::max_over_axis, {x}); }
Var softmax(Var x) { return graph_of(x).apply(OpKind::softmax, {x}); }

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  OpAttrs at;
  at.index = to_index(labels);
  return graph_of(logits).apply(OpKind::softmax_cross_entropy, {logits}, std::move(at));
}

Var mse(Var a, Var b) { return graph_of(a).apply(OpKind::mse, {a, b}); }

Var gather_rows(Var x, std::span<const int> index) {
  OpAttrs at;
  at.index = to_index(index);
  return graph_of(x).apply(OpKind::gather_rows, {x}, std::move(at));
}

Var scatter_rows(Var v, std::span<const int> index, std::size_t cols) {
  OpAttrs at;
  at.index = to_index(index);
  at.dims = {cols};
  return graph_of(v).apply(OpKind::scatter_rows, {v}, std::move(at));
}

}  // namespace lsx::ad
