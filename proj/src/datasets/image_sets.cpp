// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "lsx/datasets.hpp"
#include "lsx/rng.hpp"

namespace lsx::data {

Shape LabeledSet::sample_shape() const {
  if (inputs.rank() == 0) return {};
  return Shape(inputs.shape().begin() + 1, inputs.shape().end());
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> rows) const {
  LabeledSet out;
  out.inputs = inputs.take_rows(rows);
  out.kind = kind;
  out.confounded = confounded;
  out.num_classes = num_classes;
  out.labels.reserve(rows.size());
  out.ids.reserve(rows.size());
  for (std::size_t r : rows) {
    out.labels.push_back(labels.at(r));
    out.ids.push_back(ids.at(r));
  }
  return out;
}

void LabeledSet::validate() const {
  if (inputs.rank() == 0 || inputs.dim(0) != labels.size()) {
    throw DataError(kind + ": " + std::to_string(labels.size()) + " labels for inputs " + shape_str(inputs.shape()));
  }
  if (ids.size() != labels.size()) throw DataError(kind + ": id count mismatch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DataError(kind + ": label " + std::to_string(y) + " outside [0," + std::to_string(num_classes) + ")");
    }
  }
}

LabeledSet concat(const LabeledSet& a, const LabeledSet& b) {
  if (a.sample_shape() != b.sample_shape()) throw DataError("concat: sample shapes differ");
  if (!ids_disjoint(a, b)) throw DataError("concat: sample ids collide");
  LabeledSet out;
  out.kind = a.kind == b.kind ? a.kind : a.kind + "+" + b.kind;
  out.confounded = a.confounded || b.confounded;
  out.num_classes = std::max(a.num_classes, b.num_classes);
  Shape s = a.inputs.shape();
  s[0] = a.size() + b.size();
  std::vector<double> d = a.inputs.storage();
  d.insert(d.end(), b.inputs.storage().begin(), b.inputs.storage().end());
  out.inputs = Tensor(std::move(s), std::move(d));
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.ids = a.ids;
  out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
  return out;
}

bool ids_disjoint(const LabeledSet& a, const LabeledSet& b) {
  std::unordered_set<std::uint64_t> seen(a.ids.begin(), a.ids.end());
  return std::none_of(b.ids.begin(), b.ids.end(), [&](std::uint64_t id) { return seen.count(id) > 0; });
}

namespace {

void expect_mnist_shaped(const LabeledSet& base, const char* what) {
  if (base.inputs.rank() != 4 || base.inputs.dim(1) != 1) {
    throw DataError(std::string(what) + " needs single-channel images, got " + shape_str(base.inputs.shape()));
  }
}

}  // namespace

double decoy_shade(int label) { return (255.0 - 25.0 * label) / 255.0; }

LabeledSet make_decoy(const LabeledSet& base, Mode mode, std::uint64_t seed) {
  expect_mnist_shaped(base, "make_decoy");
  if (base.inputs.dim(2) < kDecoyPatch || base.inputs.dim(3) < kDecoyPatch) {
    throw DataError("make_decoy: images smaller than the patch, got " + shape_str(base.inputs.shape()));
  }
  LabeledSet out = base;
  out.kind = "decoy";
  out.confounded = mode == Mode::train;
  const std::size_t h = base.inputs.dim(2), w = base.inputs.dim(3);
  Rng rng = make_rng(seed, "decoy");
  std::uniform_int_distribution<int> corner(0, 3), shade(0, 255);
  for (std::size_t i = 0; i < base.size(); ++i) {
    const int c = corner(rng);
    const double v = mode == Mode::train ? decoy_shade(base.labels[i]) : shade(rng) / 255.0;
    const std::size_t r0 = (c & 1) ? h - kDecoyPatch : 0;
    const std::size_t c0 = (c & 2) ? w - kDecoyPatch : 0;
    double* img = out.inputs.data().data() + i * h * w;
    for (std::size_t r = 0; r < kDecoyPatch; ++r)
      for (std::size_t q = 0; q < kDecoyPatch; ++q) img[(r0 + r) * w + c0 + q] = v;
  }
  return out;
}

const std::array<std::array<double, 3>, 10>& color_palette() {
  // Ten hues 36 degrees apart at full saturation and value.
  static const std::array<std::array<double, 3>, 10> palette = {{
      {1.0, 0.0, 0.0},
      {1.0, 0.6, 0.0},
      {0.8, 1.0, 0.0},
      {0.2, 1.0, 0.0},
      {0.0, 1.0, 0.4},
      {0.0, 1.0, 1.0},
      {0.0, 0.4, 1.0},
      {0.2, 0.0, 1.0},
      {0.8, 0.0, 1.0},
      {1.0, 0.0, 0.6},
  }};
  return palette;
}

LabeledSet make_color(const LabeledSet& base, Mode mode, std::uint64_t seed) {
  expect_mnist_shaped(base, "make_color");
  const std::size_t n = base.size(), hw = base.inputs.dim(2) * base.inputs.dim(3);
  LabeledSet out;
  out.kind = "color";
  out.confounded = mode == Mode::train;
  out.num_classes = base.num_classes;
  out.labels = base.labels;
  out.ids = base.ids;
  out.inputs = Tensor(Shape{n, 3, base.inputs.dim(2), base.inputs.dim(3)});
  Rng rng = make_rng(seed, "color");
  std::uniform_int_distribution<int> pick(0, 9);
  const auto& pal = color_palette();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rgb = pal[static_cast<std::size_t>(mode == Mode::train ? base.labels[i] : pick(rng))];
    const double* src = base.inputs.data().data() + i * hw;
    double* dst = out.inputs.data().data() + i * 3 * hw;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < hw; ++p) dst[c * hw + p] = src[p] * rgb[c];
  }
  return out;
}

}  // namespace lsx::data
