// SPDX-License-Identifier: Apache-2.0
#include <cstddef>
#include <vector>

#include "kernels.hpp"

namespace lsx::ad::detail {
namespace {

std::vector<int> as_int(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

// Broadcast a scalar gradient over every element of `shape`.
Var spread(Var g, const Shape& shape) { return broadcast(g, shape, 1, shape_numel(shape)); }

Shape without_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

}  // namespace

std::vector<Var> backward_rule(Graph& g, NodeId id, Var go, const std::vector<bool>& want) {
  // Copy what we need: building new nodes may reallocate the node storage.
  const OpKind kind = g.node(id).kind;
  const OpAttrs attrs = g.node(id).attrs;
  const std::vector<NodeId> ids = g.node(id).inputs;
  std::vector<Var> in;
  for (NodeId i : ids) in.emplace_back(&g, i);
  const Var self(&g, id);
  std::vector<Var> out(in.size());
  auto need = [&](std::size_t i) { return i < want.size() && want[i]; };

  switch (kind) {
    case OpKind::leaf:
      break;
    case OpKind::add:
      if (need(0)) out[0] = go;
      if (need(1)) out[1] = go;
      break;
    case OpKind::sub:
      if (need(0)) out[0] = go;
      if (need(1)) out[1] = scale(go, -1.0);
      break;
    case OpKind::mul:
      if (need(0)) out[0] = mul(go, in[1]);
      if (need(1)) out[1] = mul(go, in[0]);
      break;
    case OpKind::scale:
      if (need(0)) out[0] = scale(go, attrs.scalar);
      break;
    case OpKind::matmul:
      if (need(0)) out[0] = matmul(go, transpose(in[1]));
      if (need(1)) out[1] = matmul(transpose(in[0]), go);
      break;
    case OpKind::transpose:
      if (need(0)) out[0] = transpose(go);
      break;
    case OpKind::conv2d: {
      const Shape xs = in[0].shape();
      const Shape ws = in[1].shape();
      if (need(0)) out[0] = conv2d_grad_input(go, in[1], xs[2], xs[3]);
      if (need(1)) out[1] = conv2d_grad_weight(in[0], go, ws[2], ws[3]);
      break;
    }
    case OpKind::conv2d_grad_input: {
      // y = T(g, w); dy/dg . u = conv2d(u, w), dy/dw . u = W(u, g)
      const Shape ws = in[1].shape();
      if (need(0)) out[0] = conv2d(go, in[1]);
      if (need(1)) out[1] = conv2d_grad_weight(go, in[0], ws[2], ws[3]);
      break;
    }
    case OpKind::conv2d_grad_weight: {
      const Shape xs = in[0].shape();
      if (need(0)) out[0] = conv2d_grad_input(in[1], go, xs[2], xs[3]);
      if (need(1)) out[1] = conv2d(in[0], go);
      break;
    }
    case OpKind::relu:
      if (need(0)) {
        const Tensor& x = in[0].value();
        Tensor mask(x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) mask[i] = x[i] > 0.0 ? 1.0 : 0.0;
        out[0] = mul(go, g.constant(std::move(mask)));
      }
      break;
    case OpKind::sigmoid:
      if (need(0)) out[0] = mul(go, sub(self, mul(self, self)));
      break;
    case OpKind::avgpool2d:
      if (need(0)) out[0] = avgpool2d_grad(go, attrs.dims.at(0));
      break;
    case OpKind::avgpool2d_grad:
      if (need(0)) out[0] = avgpool2d(go, attrs.dims.at(0));
      break;
    case OpKind::reshape:
      if (need(0)) out[0] = reshape(go, in[0].shape());
      break;
    case OpKind::sum:
      if (need(0)) out[0] = broadcast(go, in[0].shape(), attrs.dims.at(0), attrs.dims.at(2));
      break;
    case OpKind::broadcast: {
      const std::size_t outer = attrs.dims.at(0), inner = attrs.dims.at(1);
      if (need(0)) out[0] = sum_axes(go, outer, in[0].value().numel(), inner, in[0].shape());
      break;
    }
    case OpKind::mean:
      if (need(0)) {
        const Shape s = in[0].shape();
        out[0] = scale(spread(go, s), 1.0 / static_cast<double>(shape_numel(s)));
      }
      break;
    case OpKind::max_over_axis:
      if (need(0)) {
        const Tensor& x = in[0].value();
        const std::size_t cols = x.dim(x.rank() - 1), rows = x.numel() / cols;
        Tensor mask(x.shape());
        for (std::size_t r = 0; r < rows; ++r) {
          std::size_t best = 0;
          for (std::size_t c = 1; c < cols; ++c)
            if (x[r * cols + c] > x[r * cols + best]) best = c;
          mask[r * cols + best] = 1.0;
        }
        const Shape s = x.shape();
        Var m = g.constant(std::move(mask));
        out[0] = mul(broadcast(go, s, 1, cols), m);
      }
      break;
    case OpKind::softmax:
      if (need(0)) {
        const Shape s = in[0].shape();
        const std::size_t cols = s.back(), rows = shape_numel(s) / cols;
        Var dot = sum_axes(mul(go, self), 1, rows, cols, without_last(s));
        out[0] = mul(self, sub(go, broadcast(dot, s, 1, cols)));
      }
      break;
    case OpKind::softmax_cross_entropy:
      if (need(0)) {
        const Shape s = in[0].shape();
        const std::size_t n = s[0], k = s[1];
        Tensor onehot(s);
        for (std::size_t r = 0; r < n; ++r) onehot[r * k + attrs.index[r]] = 1.0;
        Var diff = sub(softmax(in[0]), g.constant(std::move(onehot)));
        out[0] = scale(mul(spread(go, s), diff), 1.0 / static_cast<double>(n));
      }
      break;
    case OpKind::mse:
      if (need(0) || need(1)) {
        const Shape s = in[0].shape();
        const double f = 2.0 / static_cast<double>(shape_numel(s));
        Var ga = scale(mul(spread(go, s), sub(in[0], in[1])), f);
        if (need(0)) out[0] = ga;
        if (need(1)) out[1] = scale(ga, -1.0);
      }
      break;
    case OpKind::gather_rows:
      if (need(0)) {
        const std::vector<int> idx = as_int(attrs.index);
        out[0] = scatter_rows(go, idx, in[0].shape()[1]);
      }
      break;
    case OpKind::scatter_rows:
      if (need(0)) {
        const std::vector<int> idx = as_int(attrs.index);
        out[0] = gather_rows(go, idx);
      }
      break;
  }
  return out;
}

}  // namespace lsx::ad::detail
