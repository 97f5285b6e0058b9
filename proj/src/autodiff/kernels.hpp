// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "lsx/autodiff.hpp"

namespace lsx::ad::detail {

// Computes the forward value of `kind` on `inputs`. Throws ShapeError with a
// message that omits the node; the caller prefixes the node identity.
Tensor compute(OpKind kind, const std::vector<const Tensor*>& inputs, const OpAttrs& attrs);

// Gradients for each input of node `id` given the gradient of its output.
// Only inputs with want[i] set are computed; the rest are left invalid.
std::vector<Var> backward_rule(Graph& g, NodeId id, Var grad_out, const std::vector<bool>& want);

}  // namespace lsx::ad::detail
