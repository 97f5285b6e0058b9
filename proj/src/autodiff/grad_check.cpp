// SPDX-License-Identifier: Apache-2.0
#include "lsx/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace lsx::ad {
namespace {

double eval(const GraphFn& fn, const Tensor& x) {
  // Gradients stay enabled: fn may itself differentiate with respect to x.
  Graph g;
  Var v = g.leaf(x, true);
  return fn(g, v).value().item();
}

}  // namespace

GradCheckReport grad_check(const GraphFn& fn, const Tensor& point, double eps, double tol, double floor) {
  if (!(eps > 0.0)) throw ShapeError("grad_check: eps must be positive");
  Tensor analytic;
  {
    Graph g;
    Var x = g.leaf(point, true);
    Var y = fn(g, x);
    analytic = g.backward(y, std::span<const Var>(&x, 1))[0].value();
  }
  GradCheckReport rep;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.numel(); ++i) {
    probe[i] = point[i] + eps;
    const double up = eval(fn, probe);
    probe[i] = point[i] - eps;
    const double down = eval(fn, probe);
    probe[i] = point[i];
    const double numeric = (up - down) / (2.0 * eps);
    const double abs_err = std::abs(analytic[i] - numeric);
    const double rel = abs_err / std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_index = i;
    }
  }
  rep.passed = rep.max_rel_error < tol;
  return rep;
}

}  // namespace lsx::ad
