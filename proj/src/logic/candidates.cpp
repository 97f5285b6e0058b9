// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lsx/parallel.hpp"
#include "search.hpp"

namespace lsx::logic {
namespace {

// Nonempty subsets of `items` with at most `cap` elements, in lexicographic
// index order.
template <class T>
std::vector<std::vector<T>> subsets(const std::vector<T>& items, std::size_t cap) {
  std::vector<std::vector<T>> out;
  std::vector<T> cur;
  auto rec = [&](auto&& self, std::size_t start) -> void {
    for (std::size_t i = start; i < items.size(); ++i) {
      cur.push_back(items[i]);
      out.push_back(cur);
      if (cur.size() < cap) self(self, i + 1);
      cur.pop_back();
    }
  };
  if (cap > 0) rec(rec, 0);
  return out;
}

bool one_per_group(const std::vector<Condition>& conds) {
  for (std::size_t i = 1; i < conds.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (conds[i].group == conds[j].group) return false;
  return true;
}

}  // namespace

std::vector<Rule> propositionalize(const Tensor& mask, int class_id, const ConceptSchema& schema, const Caps& caps) {
  const std::size_t slots = schema.slots, width = schema.width();
  if (mask.numel() != slots * width) throw RuleError("mask shape " + shape_str(mask.shape()) + " does not fit the schema");
  if (caps.max_objects == 0 || caps.max_attrs == 0) throw RuleError("caps must be at least 1");

  // Per marked slot: every admissible condition subset.
  std::vector<std::vector<std::vector<Condition>>> options;
  for (std::size_t s = 0; s < slots; ++s) {
    std::vector<Condition> marked;
    for (std::size_t a = 0; a < width; ++a) {
      const double v = mask[s * width + a];
      if (v != 0.0 && v != 1.0) throw RuleError("mask is not binary");
      if (v == 0.0) continue;
      if (auto loc = schema.locate(a)) marked.push_back({loc->first, loc->second});
    }
    if (marked.empty()) continue;
    std::vector<std::vector<Condition>> ok;
    for (auto& sub : subsets(marked, caps.max_attrs))
      if (one_per_group(sub)) ok.push_back(std::move(sub));
    if (!ok.empty()) options.push_back(std::move(ok));
  }

  std::vector<std::size_t> idx(options.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<Rule> out;
  for (const auto& objs : subsets(idx, caps.max_objects)) {
    std::vector<std::size_t> pick(objs.size(), 0);
    while (true) {
      std::vector<std::vector<Condition>> body;
      body.reserve(objs.size());
      for (std::size_t i = 0; i < objs.size(); ++i) body.push_back(options[objs[i]][pick[i]]);
      out.push_back(make_rule(class_id, std::move(body)));
      std::size_t i = 0;
      while (i < objs.size() && ++pick[i] == options[objs[i]].size()) pick[i++] = 0;
      if (i == objs.size()) break;
    }
  }
  return out;
}

void merge_candidates(CandidateSet& set, const std::vector<Rule>& rules) {
  for (const auto& r : rules) {
    if (r.class_id < 0) throw RuleError("negative class id");
    const auto k = static_cast<std::size_t>(r.class_id);
    if (set.by_class.size() <= k) set.by_class.resize(k + 1);
    auto& list = set.by_class[k];
    auto it = std::lower_bound(list.begin(), list.end(), r);
    if (it == list.end() || *it != r) list.insert(it, r);
  }
}

double aggregate(std::span<const double> values, Aggregation agg) {
  if (values.empty()) throw RuleError("aggregate of no values");
  switch (agg) {
    case Aggregation::mean: {
      double s = 0.0;
      for (double v : values) s += v;
      return s / static_cast<double>(values.size());
    }
    case Aggregation::min:
      return *std::min_element(values.begin(), values.end());
    case Aggregation::softmin: {
      // -tau log mean exp(-v / tau), shifted by the minimum for stability.
      constexpr double tau = 0.1;
      const double m = *std::min_element(values.begin(), values.end());
      double s = 0.0;
      for (double v : values) s += std::exp(-(v - m) / tau);
      return m - tau * std::log(s / static_cast<double>(values.size()));
    }
  }
  return 0.0;
}

std::vector<std::vector<RuleScore>> score_candidates(const CandidateSet& candidates, const data::LabeledSet& critic,
                                                     const ConceptSchema& schema, Aggregation agg) {
  const std::size_t classes = candidates.by_class.size();
  const std::size_t slots = schema.slots, width = schema.width(), n = critic.size();
  if (critic.inputs.numel() != n * slots * width) throw RuleError("critic set does not match the concept schema");
  std::vector<std::size_t> count(classes, 0);
  for (int y : critic.labels)
    if (static_cast<std::size_t>(y) < classes) ++count[static_cast<std::size_t>(y)];
  for (std::size_t k = 0; k < classes; ++k) {
    if (count[k] == 0) throw RuleError("critic set has no sample of class " + std::to_string(k));
  }

  // Slot scores per distinct object pattern, shared by all rules using it.
  std::map<std::vector<Condition>, std::size_t> pattern_id;
  for (const auto& list : candidates.by_class)
    for (const auto& r : list)
      for (const auto& o : r.objects) pattern_id.emplace(o, pattern_id.size());
  std::vector<const std::vector<Condition>*> patterns(pattern_id.size());
  for (const auto& [p, id] : pattern_id) patterns[id] = &p;
  // table[(pattern * n + sample) * slots + slot]
  std::vector<double> table(patterns.size() * n * slots);
  parallel_for(patterns.size(), [&](std::size_t p) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* z = critic.inputs.data().data() + i * slots * width;
      for (std::size_t s = 0; s < slots; ++s) {
        const double* row = z + s * width;
        double v = schema.presence ? row[schema.presence_column()] : 1.0;
        for (const auto& c : *patterns[p]) v *= row[schema.column(c.group, c.value)];
        table[(p * n + i) * slots + s] = v;
      }
    }
  });

  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t k = 0; k < classes; ++k)
    for (std::size_t r = 0; r < candidates.by_class[k].size(); ++r) jobs.emplace_back(k, r);
  std::vector<std::vector<RuleScore>> out(classes);
  for (std::size_t k = 0; k < classes; ++k) out[k].resize(candidates.by_class[k].size());

  parallel_for(jobs.size(), [&](std::size_t j) {
    const auto [k, r] = jobs[j];
    const Rule& rule = candidates.by_class[k][r];
    std::vector<std::size_t> ids;
    for (const auto& o : rule.objects) ids.push_back(pattern_id.at(o));
    std::vector<double> pos, neg, scores(rule.objects.size() * slots);
    pos.reserve(count[k]);
    neg.reserve(n - count[k]);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t o = 0; o < ids.size(); ++o)
        std::copy_n(table.begin() + static_cast<std::ptrdiff_t>((ids[o] * n + i) * slots), slots,
                    scores.begin() + static_cast<std::ptrdiff_t>(o * slots));
      const double v = search_assignment(scores, ids.size(), slots).validity;
      (static_cast<std::size_t>(critic.labels[i]) == k ? pos : neg).push_back(v);
    }
    RuleScore& sc = out[k][r];
    sc.rule = rule;
    sc.pos = aggregate(pos, agg);
    sc.neg = neg.empty() ? 0.0 : aggregate(neg, agg);
    sc.rho = sc.pos - sc.neg;
  });
  return out;
}

std::vector<Rule> select_best(const std::vector<std::vector<RuleScore>>& scores) {
  constexpr double kTie = 1e-12;
  std::vector<Rule> out;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (scores[k].empty()) throw RuleError("no candidate rules for class " + std::to_string(k));
    const RuleScore* best = &scores[k][0];
    for (const auto& s : scores[k]) {
      if (s.rho > best->rho + kTie) {
        best = &s;
      } else if (std::abs(s.rho - best->rho) <= kTie) {
        const std::size_t a = s.rule.num_conditions(), b = best->rule.num_conditions();
        if (a < b || (a == b && s.rule < best->rule)) best = &s;
      }
    }
    out.push_back(best->rule);
  }
  return out;
}

}  // namespace lsx::logic
