// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

#include "lsx/autodiff.hpp"

namespace lsx::ad {

// Builds a scalar function of one input on a fresh graph.
using GraphFn = std::function<Var(Graph&, Var)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = false;
};

// Compares backward() at `point` against central finite differences, element
// by element. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(const GraphFn& fn, const Tensor& point, double eps, double tol, double floor = 1e-3);

}  // namespace lsx::ad
