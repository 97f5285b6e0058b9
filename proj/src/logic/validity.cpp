// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "search.hpp"

namespace lsx::logic {
namespace {

// scores[j * slots + s]: presence(s) times the product of rule object j's
// condition activations at slot s.
std::vector<double> slot_scores(const Rule& rule, std::span<const double> z, const ConceptSchema& schema) {
  const std::size_t slots = schema.slots, width = schema.width();
  if (z.size() != slots * width) {
    throw RuleError("concept matrix has " + std::to_string(z.size()) + " values, schema expects " +
                    std::to_string(slots * width));
  }
  std::vector<double> scores(rule.objects.size() * slots);
  for (std::size_t j = 0; j < rule.objects.size(); ++j) {
    for (std::size_t s = 0; s < slots; ++s) {
      const double* row = z.data() + s * width;
      double v = schema.presence ? row[schema.presence_column()] : 1.0;
      for (const auto& c : rule.objects[j]) v *= row[schema.column(c.group, c.value)];
      scores[j * slots + s] = v;
    }
  }
  return scores;
}

}  // namespace

// Exhaustive search over injective object-to-slot assignments with a bound:
// a branch is cut once its partial product times the best remaining per-object
// maxima cannot beat the incumbent. Ties keep the first assignment found in
// lexicographic slot order.
Assignment search_assignment(const std::vector<double>& scores, std::size_t objects, std::size_t slots) {
  Assignment best;
  best.validity = -1.0;
  if (objects > slots) {
    best.validity = 0.0;
    best.slots.resize(objects);
    for (std::size_t j = 0; j < objects; ++j) best.slots[j] = j % slots;
    return best;
  }
  std::vector<double> suffix_max(objects + 1, 1.0);
  for (std::size_t j = objects; j-- > 0;) {
    const double m = *std::max_element(scores.begin() + static_cast<std::ptrdiff_t>(j * slots),
                                       scores.begin() + static_cast<std::ptrdiff_t>((j + 1) * slots));
    suffix_max[j] = suffix_max[j + 1] * m;
  }
  std::vector<std::size_t> cur(objects);
  std::vector<bool> used(slots, false);
  auto dfs = [&](auto&& self, std::size_t j, double prod) -> void {
    if (j == objects) {
      if (prod > best.validity) {
        best.validity = prod;
        best.slots = cur;
      }
      return;
    }
    for (std::size_t s = 0; s < slots; ++s) {
      if (used[s]) continue;
      const double p = prod * scores[j * slots + s];
      if (best.validity >= 0.0 && p * suffix_max[j + 1] <= best.validity) continue;
      used[s] = true;
      cur[j] = s;
      self(self, j + 1, p);
      used[s] = false;
    }
  };
  dfs(dfs, 0, 1.0);
  return best;
}

Assignment best_assignment(const Rule& rule, std::span<const double> z, const ConceptSchema& schema) {
  return search_assignment(slot_scores(rule, z, schema), rule.objects.size(), schema.slots);
}

double rule_validity(const Rule& rule, std::span<const double> z, const ConceptSchema& schema) {
  return best_assignment(rule, z, schema).validity;
}

Tensor ground_rule(const Rule& rule, std::span<const double> z, const ConceptSchema& schema) {
  const Assignment a = best_assignment(rule, z, schema);
  const std::size_t width = schema.width();
  Tensor mask(Shape{schema.slots, width});
  for (std::size_t j = 0; j < rule.objects.size(); ++j)
    for (const auto& c : rule.objects[j]) mask[a.slots[j] * width + schema.column(c.group, c.value)] = 1.0;
  return mask;
}

}  // namespace lsx::logic
