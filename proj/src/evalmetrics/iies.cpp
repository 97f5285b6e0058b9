// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "lsx/evalmetrics.hpp"

namespace lsx::eval {
namespace {

double dist(const double* a, const double* b, std::size_t e) {
  double s = 0.0;
  for (std::size_t j = 0; j < e; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

}  // namespace

double iies_encoded(const Tensor& z, std::span<const int> labels, IiesDenominator denom) {
  if (z.rank() != 2 || z.dim(0) != labels.size()) throw MetricError("iies: encodings must be [N, E] with N labels");
  const std::size_t n = z.dim(0), e = z.dim(1);
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw MetricError("iies: negative label");
    max_label = std::max(max_label, y);
  }
  // Classes are the labels that occur, so relabeling does not change the result.
  std::vector<std::size_t> slot(static_cast<std::size_t>(max_label + 1), SIZE_MAX);
  std::vector<std::size_t> count;
  for (int y : labels) {
    auto& s = slot[static_cast<std::size_t>(y)];
    if (s == SIZE_MAX) {
      s = count.size();
      count.push_back(0);
    }
    ++count[s];
  }
  const std::size_t k = count.size();
  if (k < 2) throw MetricError("iies needs at least two classes");

  std::vector<double> mu(k * e, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = slot[static_cast<std::size_t>(labels[i])];
    for (std::size_t j = 0; j < e; ++j) mu[c * e + j] += z[i * e + j];
  }
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < e; ++j) mu[c * e + j] /= static_cast<double>(count[c]);

  std::vector<double> intra(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = slot[static_cast<std::size_t>(labels[i])];
    intra[c] += dist(&z.storage()[i * e], &mu[c * e], e);
  }

  const double factor = denom == IiesDenominator::printed ? 1.0 / static_cast<double>(k)
                                                          : 1.0 / static_cast<double>(k - 1);
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double inter = 0.0;
    for (std::size_t o = 0; o < k; ++o)
      if (o != c) inter += dist(&mu[o * e], &mu[c * e], e);
    inter *= factor;
    if (inter == 0.0) throw MetricError("iies: class means coincide");
    total += (intra[c] / static_cast<double>(count[c])) / inter;
  }
  return total / static_cast<double>(k);
}

double iies(const Tensor& explanations, std::span<const int> labels, const nets::Model& encoder,
            IiesDenominator denom) {
  Shape s{explanations.dim(0)};
  const Shape sample = encoder.sample_shape();
  s.insert(s.end(), sample.begin(), sample.end());
  return iies_encoded(nets::embed(encoder, explanations.reshaped(s)), labels, denom);
}

}  // namespace lsx::eval
