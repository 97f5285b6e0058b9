// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <bit>
#include <random>

#include "lsx/logic.hpp"
#include "lsx/rng.hpp"
#include "oracles.hpp"

namespace lsx::logic {
namespace {

struct Fixture {
  ConceptSchema s;
  std::size_t shape, size, material, color;

  explicit Fixture(std::size_t slots = 10)
      : s(ConceptSchema::clevr(slots)),
        shape(s.find_group("shape")),
        size(s.find_group("size")),
        material(s.find_group("material")),
        color(s.find_group("color")) {}

  Condition c(std::size_t g, const char* v) const { return {g, s.find_value(g, v)}; }
  std::size_t col(const Condition& x) const { return s.column(x.group, x.value); }

  Tensor empty_mask() const { return Tensor(Shape{s.slots, s.width()}); }
  void mark(Tensor& m, std::size_t slot, const Condition& x) const { m[slot * s.width() + col(x)] = 1.0; }

  std::vector<double> random_z(std::mt19937_64& rng, bool soft_presence = false) const {
    return testing::random_concepts(s, rng, soft_presence);
  }
  Rule random_rule(std::mt19937_64& rng, std::size_t max_objects) const {
    return testing::random_rule(s, rng, max_objects);
  }
};

TEST(Propositionalize, WorkedExampleGivesSevenRules) {
  Fixture f;
  Tensor m = f.empty_mask();
  f.mark(m, 0, f.c(f.color, "green"));
  f.mark(m, 0, f.c(f.shape, "cube"));
  f.mark(m, 3, f.c(f.color, "red"));
  const auto rules = propositionalize(m, 1, f.s, {});
  EXPECT_EQ(rules.size(), 7u);
  const Rule both = make_rule(1, {{f.c(f.color, "green"), f.c(f.shape, "cube")}, {f.c(f.color, "red")}});
  EXPECT_NE(std::find(rules.begin(), rules.end(), both), rules.end());
  for (const auto& r : rules) EXPECT_EQ(r.class_id, 1);
}

TEST(Propositionalize, SingleMark) {
  Fixture f;
  Tensor m = f.empty_mask();
  f.mark(m, 5, f.c(f.size, "large"));
  const auto rules = propositionalize(m, 0, f.s, {});
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_EQ(rules[0], make_rule(0, {{f.c(f.size, "large")}}));
}

TEST(Propositionalize, AttributeCapOfOne) {
  Fixture f;
  Tensor m = f.empty_mask();
  f.mark(m, 0, f.c(f.color, "green"));
  f.mark(m, 0, f.c(f.shape, "cube"));
  f.mark(m, 1, f.c(f.color, "red"));
  f.mark(m, 1, f.c(f.size, "small"));
  EXPECT_EQ(propositionalize(m, 0, f.s, {4, 1}).size(), 8u);
}

TEST(Propositionalize, PresenceColumnAndEmptyMaskGiveNothing) {
  Fixture f;
  Tensor m = f.empty_mask();
  EXPECT_TRUE(propositionalize(m, 0, f.s, {}).empty());
  m[2 * f.s.width() + f.s.presence_column()] = 1.0;
  EXPECT_TRUE(propositionalize(m, 0, f.s, {}).empty());
}

TEST(Propositionalize, RejectsBadInput) {
  Fixture f;
  Tensor m = f.empty_mask();
  m[0] = 0.5;
  EXPECT_THROW(propositionalize(m, 0, f.s, {}), RuleError);
  EXPECT_THROW(propositionalize(Tensor(Shape{3, 3}), 0, f.s, {}), RuleError);
  EXPECT_THROW(propositionalize(f.empty_mask(), 0, f.s, {0, 1}), RuleError);
}

// Closed form for masks with at most one mark per group per object: sum over
// object subsets (size <= max_objects) of the product of per-object counts of
// nonempty attribute subsets of size <= max_attrs.
std::size_t closed_form(const std::vector<std::size_t>& marks, const Caps& caps) {
  auto choose = [](std::size_t n, std::size_t k) {
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  };
  std::vector<std::size_t> per;
  for (auto a : marks) {
    if (!a) continue;
    std::size_t c = 0;
    for (std::size_t k = 1; k <= std::min(a, caps.max_attrs); ++k) c += choose(a, k);
    per.push_back(c);
  }
  std::size_t total = 0;
  for (std::uint32_t bits = 1; bits < (1u << per.size()); ++bits) {
    if (static_cast<std::size_t>(std::popcount(bits)) > caps.max_objects) continue;
    std::size_t p = 1;
    for (std::size_t i = 0; i < per.size(); ++i)
      if (bits >> i & 1u) p *= per[i];
    total += p;
  }
  return total;
}

TEST(Propositionalize, CountMatchesClosedForm) {
  Fixture f(6);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    Tensor m = f.empty_mask();
    std::vector<std::size_t> marks(f.s.slots, 0);
    for (std::size_t slot = 0; slot < f.s.slots; ++slot) {
      if (rng() % 2) continue;
      for (std::size_t g = 0; g < f.s.groups.size(); ++g) {
        if (rng() % 2) continue;
        f.mark(m, slot, {g, rng() % f.s.groups[g].values.size()});
        ++marks[slot];
      }
    }
    const Caps caps{1 + rng() % 4, 1 + rng() % 3};
    EXPECT_EQ(propositionalize(m, 0, f.s, caps).size(), closed_form(marks, caps)) << "trial " << trial;
  }
}

TEST(Propositionalize, RulesAreValidAndMergeToUniqueSet) {
  Fixture f(5);
  std::mt19937_64 rng(4);
  Tensor m = f.empty_mask();
  for (double& v : m.data()) v = rng() % 3 == 0 ? 1.0 : 0.0;
  const auto rules = propositionalize(m, 2, f.s, {3, 2});
  // Slots with equal marks emit equal rules; merging removes them.
  CandidateSet set;
  merge_candidates(set, rules);
  const std::set<Rule> unique(rules.begin(), rules.end());
  ASSERT_EQ(set.by_class.size(), 3u);
  EXPECT_EQ(set.by_class[2].size(), unique.size());
  for (const auto& r : rules) {
    EXPECT_NO_THROW(validate(r, f.s));
    EXPECT_LE(r.objects.size(), 3u);
    for (const auto& o : r.objects) EXPECT_LE(o.size(), 2u);
  }
}

TEST(Candidates, MergingSampleUnionsKeepsCanonicalFormsUnique) {
  Fixture f(4);
  std::mt19937_64 rng(5);
  CandidateSet set;
  std::size_t emitted = 0;
  for (int sample = 0; sample < 30; ++sample) {
    Tensor m = f.empty_mask();
    for (std::size_t slot = 0; slot < 2; ++slot) {
      f.mark(m, slot, {f.shape, rng() % 2});
      if (rng() % 2) f.mark(m, slot, {f.size, rng() % 2});
    }
    const auto rules = propositionalize(m, sample % 2, f.s, {});
    emitted += rules.size();
    merge_candidates(set, rules);
  }
  std::size_t kept = 0;
  for (const auto& list : set.by_class) {
    std::set<Rule> unique(list.begin(), list.end());
    EXPECT_EQ(unique.size(), list.size());
    kept += list.size();
  }
  EXPECT_LT(kept, emitted);
}

TEST(Rule, CanonicalOrderMakesEqualRulesEqual) {
  Fixture f;
  const Rule a = make_rule(0, {{f.c(f.color, "red"), f.c(f.shape, "cube")}, {f.c(f.size, "small")}});
  const Rule b = make_rule(0, {{f.c(f.size, "small")}, {f.c(f.shape, "cube"), f.c(f.color, "red")}});
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.num_conditions(), 3u);
}

TEST(Rule, ValidateRejectsMalformedRules) {
  Fixture f;
  EXPECT_THROW(validate(make_rule(0, {}), f.s), RuleError);
  EXPECT_THROW(validate(make_rule(0, {{}}), f.s), RuleError);
  EXPECT_THROW(validate(make_rule(0, {{f.c(f.color, "red"), f.c(f.color, "blue")}}), f.s), RuleError);
  EXPECT_THROW(validate(make_rule(0, {{{9, 0}}}), f.s), RuleError);
}

TEST(Validity, SingleObjectExample) {
  Fixture f(2);
  std::vector<double> z(2 * f.s.width(), 0.0);
  const auto red = f.c(f.color, "red");
  z[f.col(red)] = 0.9;
  z[f.s.width() + f.col(red)] = 0.2;
  z[f.s.presence_column()] = z[f.s.width() + f.s.presence_column()] = 1.0;
  EXPECT_DOUBLE_EQ(rule_validity(make_rule(0, {{red}}), z, f.s), 0.9);
}

TEST(Validity, TwoObjectsNeedTwoOccupiedSlots) {
  Fixture f(3);
  std::vector<double> z(3 * f.s.width(), 1.0);
  z[f.s.width() + f.s.presence_column()] = 0.0;
  z[2 * f.s.width() + f.s.presence_column()] = 0.0;
  const Rule r = make_rule(0, {{f.c(f.shape, "cube")}, {f.c(f.shape, "sphere")}});
  EXPECT_EQ(rule_validity(r, z, f.s), 0.0);
  EXPECT_EQ(rule_validity(r, z, ConceptSchema::clevr(3)), 0.0);
}

TEST(Validity, ExactOneHotMatchIsOne) {
  Fixture f(4);
  std::vector<double> z(4 * f.s.width(), 0.0);
  auto put = [&](std::size_t slot, std::vector<Condition> cs) {
    z[slot * f.s.width() + f.s.presence_column()] = 1.0;
    for (const auto& c : cs) z[slot * f.s.width() + f.col(c)] = 1.0;
  };
  put(1, {f.c(f.shape, "cube"), f.c(f.size, "large"), f.c(f.material, "metal"), f.c(f.color, "gray")});
  put(3, {f.c(f.shape, "cylinder"), f.c(f.size, "large"), f.c(f.material, "rubber"), f.c(f.color, "red")});
  const Rule r = make_rule(0, {{f.c(f.shape, "cube"), f.c(f.size, "large")}, {f.c(f.shape, "cylinder")}});
  EXPECT_EQ(rule_validity(r, z, f.s), 1.0);
}

TEST(Validity, MatchesExhaustiveEnumeration) {
  std::mt19937_64 rng(7);
  for (std::size_t slots = 1; slots <= 5; ++slots) {
    Fixture f(slots);
    for (int trial = 0; trial < 80; ++trial) {
      const auto z = f.random_z(rng, trial % 2 == 1);
      const Rule r = f.random_rule(rng, 3);
      const double v = rule_validity(r, z, f.s);
      EXPECT_NEAR(v, testing::validity_brute_force(r, z, f.s).first, 1e-12);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Validity, InvariantUnderSlotPermutation) {
  Fixture f(5);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const auto z = f.random_z(rng);
    const Rule r = f.random_rule(rng, 3);
    std::vector<std::size_t> perm(5);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> zp(z.size());
    const std::size_t w = f.s.width();
    for (std::size_t s = 0; s < 5; ++s) std::copy_n(z.begin() + perm[s] * w, w, zp.begin() + s * w);
    EXPECT_NEAR(rule_validity(r, z, f.s), rule_validity(r, zp, f.s), 1e-15);
  }
}

TEST(Validity, AddingAConditionNeverIncreasesValidity) {
  Fixture f(4);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    const auto z = f.random_z(rng, true);
    Rule r = f.random_rule(rng, 2);
    auto objects = r.objects;
    auto& o = objects[rng() % objects.size()];
    std::size_t g = 0;
    while (g < f.s.groups.size() && std::any_of(o.begin(), o.end(), [&](const Condition& c) { return c.group == g; })) ++g;
    if (g == f.s.groups.size()) continue;
    o.push_back({g, rng() % f.s.groups[g].values.size()});
    EXPECT_LE(rule_validity(make_rule(0, objects), z, f.s), rule_validity(r, z, f.s));
  }
}

TEST(Grounding, SingleObjectLandsOnBestSlot) {
  Fixture f(4);
  std::vector<double> z(4 * f.s.width(), 0.0);
  const auto red = f.c(f.color, "red");
  for (std::size_t s = 0; s < 4; ++s) {
    z[s * f.s.width() + f.s.presence_column()] = 1.0;
    z[s * f.s.width() + f.col(red)] = s == 2 ? 0.8 : 0.3;
  }
  const Tensor g = ground_rule(make_rule(0, {{red}}), z, f.s);
  EXPECT_EQ(g.shape(), (Shape{4, f.s.width()}));
  EXPECT_EQ(g[2 * f.s.width() + f.col(red)], 1.0);
  double total = 0.0;
  for (double v : g.data()) total += v;
  EXPECT_EQ(total, 1.0);
}

TEST(Grounding, MatchesExhaustiveArgmaxOnThreeSlots) {
  Fixture f(3);
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const auto z = f.random_z(rng, true);
    const Rule r = make_rule(0, {{f.c(f.shape, "cube"), f.c(f.color, "red")}, {f.c(f.size, "small")}});
    const auto [v, slots] = testing::validity_brute_force(r, z, f.s);
    Tensor want(Shape{3, f.s.width()});
    for (std::size_t j = 0; j < r.objects.size(); ++j)
      for (const auto& c : r.objects[j]) want[slots[j] * f.s.width() + f.col(c)] = 1.0;
    EXPECT_EQ(ground_rule(r, z, f.s), want);
  }
}

TEST(Grounding, PermutingSlotsPermutesTheMask) {
  Fixture f(4);
  std::mt19937_64 rng(11);
  const std::size_t w = f.s.width();
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  for (int trial = 0; trial < 20; ++trial) {
    const auto z = f.random_z(rng, true);
    const Rule r = make_rule(0, {{f.c(f.shape, "sphere")}, {f.c(f.color, "blue"), f.c(f.size, "large")}});
    std::vector<double> zp(z.size());
    for (std::size_t s = 0; s < 4; ++s) std::copy_n(z.begin() + perm[s] * w, w, zp.begin() + s * w);
    const Tensor g = ground_rule(r, z, f.s), gp = ground_rule(r, zp, f.s);
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t a = 0; a < w; ++a) EXPECT_EQ(gp[s * w + a], g[perm[s] * w + a]);
  }
}

data::LabeledSet concept_set(const ConceptSchema& s, const std::vector<std::vector<double>>& rows,
                             const std::vector<int>& labels) {
  data::LabeledSet set;
  set.num_classes = 2;
  set.labels = labels;
  std::vector<double> d;
  for (const auto& r : rows) d.insert(d.end(), r.begin(), r.end());
  set.inputs = Tensor(Shape{rows.size(), s.slots, s.width()}, d);
  for (std::size_t i = 0; i < rows.size(); ++i) set.ids.push_back(i);
  return set;
}

TEST(Scores, HandComputedToySet) {
  Fixture f(2);
  const std::size_t w = f.s.width(), pc = f.s.presence_column();
  const auto red = f.c(f.color, "red"), cube = f.c(f.shape, "cube");
  auto sample = [&](double p0, double r0, double p1, double r1) {
    std::vector<double> z(2 * w, 0.0);
    z[pc] = p0;
    z[f.col(red)] = r0;
    z[w + pc] = p1;
    z[w + f.col(red)] = r1;
    z[f.col(cube)] = 0.5;
    return z;
  };
  const auto set = concept_set(f.s, {sample(1, 0.9, 1, 0.2), sample(1, 0.5, 0, 0.0), sample(1, 0.3, 0, 1.0)}, {0, 0, 1});
  CandidateSet c;
  merge_candidates(c, {make_rule(0, {{red}}), make_rule(1, {{cube}})});
  const auto scores = score_candidates(c, set, f.s);
  ASSERT_EQ(scores.size(), 2u);
  EXPECT_NEAR(scores[0][0].pos, 0.7, 1e-12);
  EXPECT_NEAR(scores[0][0].neg, 0.3, 1e-12);
  EXPECT_NEAR(scores[0][0].rho, 0.4, 1e-12);
  EXPECT_NEAR(scores[1][0].pos, 0.5, 1e-12);
  EXPECT_NEAR(scores[1][0].neg, 0.5, 1e-12);
  EXPECT_NEAR(scores[1][0].rho, 0.0, 1e-12);

  CandidateSet missing;
  merge_candidates(missing, {make_rule(0, {{red}}), make_rule(2, {{cube}})});
  EXPECT_THROW(score_candidates(missing, set, f.s), RuleError);
}

TEST(Scores, PerfectRuleHasRhoOne) {
  Fixture f(1);
  const std::size_t w = f.s.width();
  std::vector<double> pos(w, 0.0), neg(w, 0.0);
  pos[f.s.presence_column()] = neg[f.s.presence_column()] = 1.0;
  pos[f.col(f.c(f.shape, "cube"))] = 1.0;
  neg[f.col(f.c(f.shape, "sphere"))] = 1.0;
  const auto set = concept_set(f.s, {pos, pos, neg}, {0, 0, 1});
  CandidateSet c;
  merge_candidates(c, {make_rule(0, {{f.c(f.shape, "cube")}}), make_rule(1, {{f.c(f.shape, "sphere")}})});
  const auto scores = score_candidates(c, set, f.s);
  EXPECT_DOUBLE_EQ(scores[0][0].rho, 1.0);
  EXPECT_DOUBLE_EQ(scores[1][0].rho, 1.0);
}

RuleScore scored(Rule r, double rho) {
  RuleScore s;
  s.rule = std::move(r);
  s.rho = rho;
  return s;
}

TEST(SelectBest, PicksHighestRhoThenFewestConditions) {
  Fixture f;
  const Rule a = make_rule(0, {{f.c(f.shape, "cube")}});
  const Rule b = make_rule(0, {{f.c(f.shape, "sphere")}});
  const Rule c = make_rule(0, {{f.c(f.color, "red")}});
  EXPECT_EQ(select_best({{scored(a, 0.2), scored(b, 0.9), scored(c, 0.1)}})[0], b);

  const Rule big = make_rule(0, {{f.c(f.shape, "cube"), f.c(f.size, "large"), f.c(f.color, "gray")}});
  EXPECT_EQ(select_best({{scored(big, 0.9), scored(c, 0.9)}})[0], c);
  EXPECT_EQ(select_best({{scored(c, 0.9), scored(a, 0.9)}})[0], std::min(a, c));
  EXPECT_EQ(select_best({{scored(big, -0.5)}})[0], big);
  EXPECT_THROW(select_best({{scored(a, 0.1)}, {}}), RuleError);
}

TEST(Text, RoundTripsThroughParser) {
  Fixture f;
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    Rule r = f.random_rule(rng, 4);
    r.class_id = static_cast<int>(rng() % 12);
    const std::string text = to_text(r, f.s);
    EXPECT_EQ(parse_rule(text, f.s), r) << text;
  }
  const Rule r = make_rule(2, {{f.c(f.shape, "cube"), f.c(f.color, "gray")}});
  EXPECT_EQ(to_text(r, f.s), "class2(X):- in(O1,X),shape(O1,cube),color(O1,gray)");
}

TEST(Text, MalformedTextIsRejected) {
  Fixture f;
  EXPECT_THROW(parse_rule("class0(X):- in(O1,X),hue(O1,red)", f.s), RuleError);
  EXPECT_THROW(parse_rule("class0(X):- in(O1,X),color(O2,red)", f.s), RuleError);
  EXPECT_THROW(parse_rule("class0(X) in(O1,X)", f.s), RuleError);
}

TEST(Aggregate, Modes) {
  const std::vector<double> v{0.2, 0.8, 0.5};
  EXPECT_DOUBLE_EQ(aggregate(v, Aggregation::mean), 0.5);
  EXPECT_DOUBLE_EQ(aggregate(v, Aggregation::min), 0.2);
  const double soft = aggregate(v, Aggregation::softmin);
  EXPECT_GE(soft, 0.2);
  EXPECT_LE(soft, 0.5);
  EXPECT_THROW(aggregate(std::vector<double>{}, Aggregation::mean), RuleError);
}

}  // namespace
}  // namespace lsx::logic
