// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <unordered_set>

#include "lsx/datasets.hpp"
#include "lsx/rng.hpp"

namespace lsx::data {

std::vector<std::size_t> stratified_sample(std::span<const int> labels, std::size_t classes, std::size_t n,
                                           std::uint64_t seed, std::span<const std::size_t> exclude) {
  if (classes == 0) throw DataError("stratified_sample: no classes");
  std::unordered_set<std::size_t> skip(exclude.begin(), exclude.end());
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (skip.count(i)) continue;
    by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
  }
  Rng rng = make_rng(seed, "stratified");
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t k = 0; k < classes; ++k) {
    const std::size_t want = n / classes + (k < n % classes ? 1 : 0);
    if (by_class[k].size() < want) {
      throw DataError("class " + std::to_string(k) + " has " + std::to_string(by_class[k].size()) +
                      " samples, " + std::to_string(want) + " requested");
    }
    std::shuffle(by_class[k].begin(), by_class[k].end(), rng);
    out.insert(out.end(), by_class[k].begin(), by_class[k].begin() + static_cast<std::ptrdiff_t>(want));
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

Split make_split(const LabeledSet& pool, const SplitPolicy& policy, std::uint64_t seed, const LabeledSet* heldout) {
  if (policy.learner_size == 0) throw DataError("learner set size must be positive");
  if (policy.critic_size == 0) throw DataError("critic set size must be positive");
  const std::vector<std::size_t> learner_rows =
      stratified_sample(pool.labels, pool.num_classes, policy.learner_size, derive_seed(seed, "learner"));
  Split out;
  out.learner = pool.subset(learner_rows);
  switch (policy.relation) {
    case CriticRelation::subset: {
      if (policy.critic_size > policy.learner_size) throw DataError("critic subset larger than learner set");
      auto rows = stratified_sample(out.learner.labels, pool.num_classes, policy.critic_size, derive_seed(seed, "critic"));
      out.critic = out.learner.subset(rows);
      break;
    }
    case CriticRelation::disjoint: {
      auto rows = stratified_sample(pool.labels, pool.num_classes, policy.critic_size, derive_seed(seed, "critic"),
                                    learner_rows);
      out.critic = pool.subset(rows);
      break;
    }
    case CriticRelation::deconfounded_heldout: {
      if (!heldout) throw DataError("deconfounded critic set needs a held-out set");
      auto rows = stratified_sample(heldout->labels, heldout->num_classes, policy.critic_size, derive_seed(seed, "critic"));
      out.critic = heldout->subset(rows);
      break;
    }
  }
  if (policy.relation != CriticRelation::subset && !ids_disjoint(out.learner, out.critic)) {
    throw DataError("critic set overlaps the learner set");
  }
  return out;
}

}  // namespace lsx::data
