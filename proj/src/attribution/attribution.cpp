// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "lsx/attribution.hpp"

namespace lsx::attr {
namespace {

constexpr std::size_t kChunk = 128;

void check_labels(const Var& x, std::span<const int> labels) {
  if (x.shape().empty() || x.shape()[0] != labels.size()) {
    throw ShapeError("attribution: " + std::to_string(labels.size()) + " labels for batch " + shape_str(x.shape()));
  }
}

void check_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NonFiniteError(std::string(what) + ": non-finite attribution");
}

}  // namespace

Var input_x_gradient(const nets::Model& model, std::span<const Var> p, Var x, std::span<const int> labels,
                     bool build_graph) {
  check_labels(x, labels);
  Graph& g = x.graph();
  if (!x.requires_grad()) throw ShapeError("input_x_gradient: input must be a leaf with requires_grad");
  Var target = ad::sum(ad::gather_rows(model.logits(p, x), labels));
  Var grad = g.backward(target, std::span<const Var>(&x, 1), build_graph)[0];
  Var e = ad::mul(grad, x);
  check_finite(e.value(), "input_x_gradient");
  return e;
}

Tensor input_x_gradient(const nets::Model& model, const Tensor& x, std::span<const int> labels) {
  const std::size_t n = x.dim(0);
  if (labels.size() != n) throw ShapeError("input_x_gradient: label count mismatch");
  std::vector<double> out;
  out.reserve(x.numel());
  for (std::size_t s = 0; s < n; s += kChunk) {
    const std::size_t e = std::min(n, s + kChunk);
    Graph g;
    auto p = model.bind(g, false);
    Var xv = g.leaf(x.slice_rows(s, e), true);
    Var m = input_x_gradient(model, p, xv, labels.subspan(s, e - s), false);
    out.insert(out.end(), m.value().storage().begin(), m.value().storage().end());
  }
  return Tensor(x.shape(), std::move(out));
}

Var integrated_gradients(const nets::Model& model, std::span<const Var> p, Var z, std::span<const int> labels,
                         std::size_t steps, bool build_graph) {
  if (steps == 0) throw ShapeError("integrated_gradients: steps must be >= 1");
  check_labels(z, labels);
  if (z.shape().size() != 2) throw ShapeError("integrated_gradients expects [N, D] inputs");
  Graph& g = z.graph();
  const std::size_t n = z.shape()[0], d = z.shape()[1];
  // Path points stacked alpha-major: row a*n + i holds alpha_a * z_i.
  Tensor path(Shape{steps * n, d});
  const Tensor& zv = z.value();
  for (std::size_t a = 0; a < steps; ++a) {
    const double alpha = (static_cast<double>(a) + 0.5) / static_cast<double>(steps);
    for (std::size_t j = 0; j < n * d; ++j) path[a * n * d + j] = alpha * zv[j];
  }
  std::vector<int> rep;
  rep.reserve(steps * n);
  for (std::size_t a = 0; a < steps; ++a) rep.insert(rep.end(), labels.begin(), labels.end());
  Var xs = g.leaf(std::move(path), true);
  Var target = ad::sum(ad::gather_rows(model.logits(p, xs), rep));
  Var grad = g.backward(target, std::span<const Var>(&xs, 1), build_graph)[0];
  Var avg = ad::sum_axes(grad, steps, n * d, 1, Shape{n, d});
  Var ig = ad::mul(ad::scale(avg, 1.0 / static_cast<double>(steps)), z);
  check_finite(ig.value(), "integrated_gradients");
  return ig;
}

Tensor integrated_gradients(const nets::Model& model, const Tensor& z, std::span<const int> labels, std::size_t steps) {
  if (z.rank() < 2) throw ShapeError("integrated_gradients expects a batch");
  const std::size_t n = z.dim(0), d = z.numel() / std::max<std::size_t>(n, 1);
  if (labels.size() != n) throw ShapeError("integrated_gradients: label count mismatch");
  std::vector<double> out;
  out.reserve(z.numel());
  for (std::size_t s = 0; s < n; s += kChunk) {
    const std::size_t e = std::min(n, s + kChunk);
    Graph g;
    auto p = model.bind(g, false);
    Var zv = g.leaf(z.slice_rows(s, e).reshaped(Shape{e - s, d}));
    Var ig = integrated_gradients(model, p, zv, labels.subspan(s, e - s), steps, false);
    out.insert(out.end(), ig.value().storage().begin(), ig.value().storage().end());
  }
  return Tensor(z.shape(), std::move(out));
}

Tensor normalize_rows(const Tensor& values) {
  if (values.rank() == 0) throw ShapeError("normalize_rows on a scalar");
  const std::size_t n = values.dim(0), w = n ? values.numel() / n : 0;
  Tensor out = values;
  for (std::size_t r = 0; r < n; ++r) {
    double m = 0.0;
    for (std::size_t j = 0; j < w; ++j) m = std::max(m, std::abs(values[r * w + j]));
    if (m == 0.0) continue;
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] /= m;
  }
  return out;
}

Tensor binarize(const Tensor& values, double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw ShapeError("binarize: delta must lie in [0, 1]");
  Tensor norm = normalize_rows(values);
  for (double& v : norm.data()) v = v > delta ? 1.0 : 0.0;
  return norm;
}

std::vector<AttributionMap> to_maps(const Tensor& values, const data::LabeledSet& set, std::span<const int> predicted) {
  if (values.rank() == 0 || values.dim(0) != set.size() || predicted.size() != set.size()) {
    throw ShapeError("to_maps: batch sizes disagree");
  }
  std::vector<AttributionMap> out;
  out.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    std::size_t row = i;
    AttributionMap m;
    m.values = values.take_rows(std::span<const std::size_t>(&row, 1)).reshaped(set.sample_shape());
    m.sample_id = set.ids[i];
    m.label = set.labels[i];
    m.predicted = predicted[i];
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace lsx::attr
