// SPDX-License-Identifier: Apache-2.0
//
// InputXGradient and integrated-gradients attributions, binarization of
// concept attributions, and explanation dumps.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lsx/autodiff.hpp"
#include "lsx/datasets.hpp"
#include "lsx/nets.hpp"

namespace lsx::attr {

using ad::Graph;
using ad::Var;

struct AttributionMap {
  Tensor values;  // shape of one input sample
  std::uint64_t sample_id = 0;
  int label = 0;  // explained class
  int predicted = 0;
  bool differentiable = false;
};

// e = x * d f_y(x) / dx for every row of x, y the given labels. `p` are the
// model parameters bound in the graph of x. With build_graph the result is
// differentiable with respect to `p`.
Var input_x_gradient(const nets::Model& model, std::span<const Var> p, Var x, std::span<const int> labels,
                     bool build_graph);

// Value-only InputXGradient over a batch, computed in chunks.
Tensor input_x_gradient(const nets::Model& model, const Tensor& x, std::span<const int> labels);

// z * mean over alpha = (i + 1/2) / m of d f_y(alpha z) / d(alpha z), zero baseline.
// `z` is [N, D] and must belong to the graph of `p`.
Var integrated_gradients(const nets::Model& model, std::span<const Var> p, Var z, std::span<const int> labels,
                         std::size_t steps, bool build_graph);
Tensor integrated_gradients(const nets::Model& model, const Tensor& z, std::span<const int> labels,
                            std::size_t steps = 50);

// Per-row division by the row's maximum absolute value; zero rows stay zero.
Tensor normalize_rows(const Tensor& values);

// 1 where value / max|value| > delta, per leading-axis row.
Tensor binarize(const Tensor& values, double delta);

std::vector<AttributionMap> to_maps(const Tensor& values, const data::LabeledSet& set, std::span<const int> predicted);

// CSV: sample_id,label,predicted,v0,v1,...
void write_csv(const std::filesystem::path& path, std::span<const AttributionMap> maps);
// Binary PGM of |values| summed over channels, scaled to 0..255.
void write_pgm(const std::filesystem::path& path, const AttributionMap& map);

}  // namespace lsx::attr
