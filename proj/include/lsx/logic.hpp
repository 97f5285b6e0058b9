// SPDX-License-Identifier: Apache-2.0
//
// Conjunctive class rules over concept matrices: candidate generation from
// binarized attributions, soft evaluation, ranking and grounding.
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "lsx/concepts.hpp"
#include "lsx/datasets.hpp"
#include "lsx/tensor.hpp"

namespace lsx::logic {

class RuleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Conditions within an object and the objects themselves are kept sorted, so
// equal rules compare equal.
struct Rule {
  int class_id = 0;
  std::vector<std::vector<Condition>> objects;

  std::size_t num_conditions() const;
  auto operator<=>(const Rule&) const = default;
};

Rule make_rule(int class_id, std::vector<std::vector<Condition>> objects);
// Throws RuleError unless every object is nonempty, within the schema and has
// at most one condition per group.
void validate(const Rule& rule, const ConceptSchema& schema);

struct Caps {
  std::size_t max_objects = 4;
  std::size_t max_attrs = 3;
};

// mask: binary [O, A]. Objects are slots with at least one marked attribute
// column; the presence column never becomes a condition.
std::vector<Rule> propositionalize(const Tensor& mask, int class_id, const ConceptSchema& schema, const Caps& caps);

struct Assignment {
  double validity = 0.0;
  std::vector<std::size_t> slots;  // slot of each rule object
};

// z: [O, A] values of one sample (row-major, O = schema.slots).
Assignment best_assignment(const Rule& rule, std::span<const double> z, const ConceptSchema& schema);
double rule_validity(const Rule& rule, std::span<const double> z, const ConceptSchema& schema);
// Binary [O, A] mask with a 1 at each (assigned slot, condition column).
Tensor ground_rule(const Rule& rule, std::span<const double> z, const ConceptSchema& schema);

// Per-class deduplicated candidates; index k holds class k.
struct CandidateSet {
  std::vector<std::vector<Rule>> by_class;
  Caps caps;
};

// Adds rules, skipping canonical duplicates within a class.
void merge_candidates(CandidateSet& set, const std::vector<Rule>& rules);

enum class Aggregation { mean, min, softmin };

struct RuleScore {
  Rule rule;
  double pos = 0.0;
  double neg = 0.0;
  double rho = 0.0;
};

double aggregate(std::span<const double> values, Aggregation agg);

std::vector<std::vector<RuleScore>> score_candidates(const CandidateSet& candidates, const data::LabeledSet& critic,
                                                     const ConceptSchema& schema,
                                                     Aggregation agg = Aggregation::mean);

// Highest rho per class; ties go to fewer conditions, then the smaller rule.
std::vector<Rule> select_best(const std::vector<std::vector<RuleScore>>& scores);

// classK(X):- in(O1,X),...,group(O1,value),...
std::string to_text(const Rule& rule, const ConceptSchema& schema);
Rule parse_rule(std::string_view text, const ConceptSchema& schema);

}  // namespace lsx::logic
