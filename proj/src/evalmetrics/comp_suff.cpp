// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>

#include "lsx/evalmetrics.hpp"
#include "lsx/rng.hpp"

namespace lsx::eval {
namespace {

void check_b(std::span<const double> b_set) {
  if (b_set.empty()) throw MetricError("empty B set");
  for (double q : b_set)
    if (!(q > 0.0 && q <= 100.0)) throw MetricError("B percentage " + std::to_string(q) + " outside (0, 100]");
}

std::size_t check_pair(const Tensor& inputs, const Tensor& explanations) {
  if (inputs.rank() == 0 || inputs.dim(0) == 0) throw MetricError("comp/suff: empty input set");
  if (inputs.numel() != explanations.numel() || explanations.dim(0) != inputs.dim(0)) {
    throw MetricError("comp/suff: explanations do not match the inputs");
  }
  return inputs.numel() / inputs.dim(0);
}

Tensor as_model_batch(const nets::Model& model, const Tensor& flat) {
  Shape s{flat.dim(0)};
  const Shape sample = model.sample_shape();
  s.insert(s.end(), sample.begin(), sample.end());
  return flat.reshaped(s);
}

std::vector<double> class_probs(const nets::Model& model, const Tensor& batch, std::span<const int> cls) {
  const Tensor logits = nets::predict(model, as_model_batch(model, batch));
  const std::size_t k = logits.dim(1);
  std::vector<double> out(cls.size());
  for (std::size_t i = 0; i < cls.size(); ++i) {
    const double* row = &logits.storage()[i * k];
    const double m = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
    out[i] = std::exp(row[static_cast<std::size_t>(cls[i])] - m) / z;
  }
  return out;
}

double accuracy_pct(const nets::Model& model, const Tensor& batch, std::span<const int> labels) {
  const auto pred = nets::argmax_rows(nets::predict(model, as_model_batch(model, batch)));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i] ? 1 : 0;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(pred.size());
}

// Writes `fill` into the first k positions of `order` (removed) or into every
// other position (kept).
void mask_row(double* row, const std::vector<std::size_t>& order, std::size_t k, double fill, bool keep) {
  if (keep) {
    for (std::size_t r = k; r < order.size(); ++r) row[order[r]] = fill;
  } else {
    for (std::size_t r = 0; r < k; ++r) row[order[r]] = fill;
  }
}

}  // namespace

std::size_t top_count(double q, std::size_t d) {
  if (!(q > 0.0 && q <= 100.0)) throw MetricError("q outside (0, 100]");
  // Guard against 10.000000000000002-style products rounding up.
  const double raw = q * static_cast<double>(d) / 100.0;
  const double k = std::ceil(raw - 1e-9);
  return std::min(d, static_cast<std::size_t>(std::max(0.0, k)));
}

std::vector<std::size_t> rank_entries(std::span<const double> importance) {
  std::vector<std::size_t> order(importance.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(importance[a]) > std::abs(importance[b]); });
  return order;
}

std::vector<double> default_b_set() { return {1, 5, 10, 20, 50}; }

double dataset_median(const Tensor& inputs) {
  if (inputs.numel() == 0) throw MetricError("median of an empty set");
  std::vector<double> v = inputs.storage();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

CompSuff comp_suff_discrete(const nets::Model& model, const Tensor& inputs, const Tensor& explanations,
                            std::span<const double> b_set) {
  check_b(b_set);
  const std::size_t d = check_pair(inputs, explanations);
  const std::size_t n = inputs.dim(0);
  const Tensor flat = inputs.reshaped(Shape{n, d});
  const auto cls = nets::argmax_rows(nets::predict(model, as_model_batch(model, flat)));
  const auto p_full = class_probs(model, flat, cls);

  std::vector<std::vector<std::size_t>> orders(n);
  for (std::size_t i = 0; i < n; ++i) orders[i] = rank_entries(explanations.data().subspan(i * d, d));

  CompSuff out;
  for (double q : b_set) {
    const std::size_t k = top_count(q, d);
    Tensor removed = flat, kept = flat;
    for (std::size_t i = 0; i < n; ++i) {
      mask_row(&removed.storage()[i * d], orders[i], k, 0.0, false);
      mask_row(&kept.storage()[i * d], orders[i], k, 0.0, true);
    }
    const auto p_removed = class_probs(model, removed, cls);
    const auto p_kept = class_probs(model, kept, cls);
    double c = 0.0, s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      c += p_full[i] - p_removed[i];
      s += p_full[i] - p_kept[i];
    }
    out.comp += c / static_cast<double>(n);
    out.suff += s / static_cast<double>(n);
  }
  out.comp /= static_cast<double>(b_set.size());
  out.suff /= static_cast<double>(b_set.size());
  return out;
}

CompSuff comp_suff_continuous(const nets::Model& model, const Tensor& inputs, std::span<const int> labels,
                              const Tensor& explanations, std::span<const double> b_set, std::uint64_t seed) {
  check_b(b_set);
  const std::size_t d = check_pair(inputs, explanations);
  const std::size_t n = inputs.dim(0);
  if (labels.size() != n) throw MetricError("comp/suff: label count mismatch");
  const Tensor flat = inputs.reshaped(Shape{n, d});
  const double median = dataset_median(flat);

  Rng tie_rng = make_rng(seed, "tie-break");
  Rng rand_rng = make_rng(seed, "random-baseline");
  std::vector<std::vector<std::size_t>> top(n), random(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), tie_rng);
    random[i] = order;
    const auto e = explanations.data().subspan(i * d, d);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(e[a]) > std::abs(e[b]); });
    top[i] = std::move(order);
    std::shuffle(random[i].begin(), random[i].end(), rand_rng);
  }

  CompSuff out;
  for (double q : b_set) {
    const std::size_t k = top_count(q, d);
    Tensor top_removed = flat, top_kept = flat, rand_removed = flat, rand_kept = flat;
    for (std::size_t i = 0; i < n; ++i) {
      mask_row(&top_removed.storage()[i * d], top[i], k, median, false);
      mask_row(&top_kept.storage()[i * d], top[i], k, median, true);
      mask_row(&rand_removed.storage()[i * d], random[i], k, median, false);
      mask_row(&rand_kept.storage()[i * d], random[i], k, median, true);
    }
    out.comp += accuracy_pct(model, rand_removed, labels) - accuracy_pct(model, top_removed, labels);
    out.suff += accuracy_pct(model, rand_kept, labels) - accuracy_pct(model, top_kept, labels);
  }
  out.comp /= static_cast<double>(b_set.size());
  out.suff /= static_cast<double>(b_set.size());
  return out;
}

}  // namespace lsx::eval
