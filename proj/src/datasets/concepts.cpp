// SPDX-License-Identifier: Apache-2.0
#include "lsx/concepts.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "lsx/datasets.hpp"
#include "lsx/rng.hpp"

namespace lsx {

std::size_t ConceptSchema::width() const { return offset(groups.size()) + (presence ? 1 : 0); }

std::size_t ConceptSchema::offset(std::size_t group) const {
  std::size_t off = 0;
  for (std::size_t g = 0; g < group && g < groups.size(); ++g) off += groups[g].values.size();
  return off;
}

std::size_t ConceptSchema::presence_column() const {
  if (!presence) throw std::logic_error("schema has no presence column");
  return offset(groups.size());
}

std::optional<std::pair<std::size_t, std::size_t>> ConceptSchema::locate(std::size_t column) const {
  std::size_t off = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (column < off + groups[g].values.size()) return std::make_pair(g, column - off);
    off += groups[g].values.size();
  }
  return std::nullopt;
}

std::size_t ConceptSchema::find_group(const std::string& name) const {
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (groups[g].name == name) return g;
  throw std::invalid_argument("unknown attribute group '" + name + "'");
}

std::size_t ConceptSchema::find_value(std::size_t group, const std::string& name) const {
  const auto& vals = groups.at(group).values;
  for (std::size_t v = 0; v < vals.size(); ++v)
    if (vals[v] == name) return v;
  throw std::invalid_argument("unknown value '" + name + "' in group '" + groups[group].name + "'");
}

ConceptSchema ConceptSchema::clevr(std::size_t slots) {
  ConceptSchema s;
  s.slots = slots;
  s.presence = true;
  s.groups = {
      {"shape", {"cube", "sphere", "cylinder"}},
      {"size", {"small", "large"}},
      {"material", {"rubber", "metal"}},
      {"color", {"gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow"}},
  };
  return s;
}

ConceptSchema ConceptSchema::cub() {
  ConceptSchema s;
  s.slots = 1;
  s.presence = false;
  for (int g = 0; g < 28; ++g) s.groups.push_back({"g" + std::to_string(g), {"v0", "v1", "v2", "v3"}});
  return s;
}

bool object_matches(const ObjectAttrs& obj, const std::vector<Condition>& conds) {
  return std::all_of(conds.begin(), conds.end(),
                     [&](const Condition& c) { return c.group < obj.size() && obj[c.group] == c.value; });
}

bool scene_satisfies(const std::vector<ObjectAttrs>& scene, const std::vector<std::vector<Condition>>& templates) {
  std::vector<bool> used(scene.size(), false);
  std::function<bool(std::size_t)> place = [&](std::size_t t) {
    if (t == templates.size()) return true;
    for (std::size_t s = 0; s < scene.size(); ++s) {
      if (used[s] || !object_matches(scene[s], templates[t])) continue;
      used[s] = true;
      if (place(t + 1)) return true;
      used[s] = false;
    }
    return false;
  };
  return place(0);
}

namespace data {

std::vector<ClassRule> hans3_rules(const ConceptSchema& s) {
  const std::size_t shape = s.find_group("shape"), size = s.find_group("size");
  const std::size_t material = s.find_group("material"), color = s.find_group("color");
  auto c = [&](std::size_t g, const char* v) { return Condition{g, s.find_value(g, v)}; };
  std::vector<ClassRule> rules(3);
  rules[0].class_id = 0;
  rules[0].objects = {{c(shape, "cube"), c(size, "large")}, {c(shape, "cylinder"), c(size, "large")}};
  rules[0].confounder = std::make_pair(std::size_t{0}, c(color, "gray"));
  rules[1].class_id = 1;
  rules[1].objects = {{c(shape, "cube"), c(size, "small"), c(material, "metal")},
                      {c(shape, "sphere"), c(size, "small")}};
  rules[1].confounder = std::make_pair(std::size_t{1}, c(material, "metal"));
  rules[2].class_id = 2;
  rules[2].objects = {{c(shape, "sphere"), c(size, "large"), c(color, "blue")},
                      {c(shape, "sphere"), c(size, "small"), c(color, "yellow")}};
  for (auto& r : rules)
    for (auto& o : r.objects) std::sort(o.begin(), o.end());
  return rules;
}

namespace {

void check_rule(const ConceptSchema& s, const ClassRule& r) {
  if (r.objects.empty() || r.objects.size() > s.slots) {
    throw DataError("class " + std::to_string(r.class_id) + " rule does not fit in " + std::to_string(s.slots) + " slots");
  }
  auto check = [&](const Condition& c) {
    if (c.group >= s.groups.size() || c.value >= s.groups[c.group].values.size()) {
      throw DataError("class " + std::to_string(r.class_id) + " rule names an attribute outside the schema");
    }
  };
  for (const auto& o : r.objects) {
    for (std::size_t i = 0; i < o.size(); ++i) {
      check(o[i]);
      for (std::size_t j = 0; j < i; ++j)
        if (o[i].group == o[j].group && o[i].value != o[j].value) {
          throw DataError("class " + std::to_string(r.class_id) + " rule object has conflicting conditions");
        }
    }
  }
  if (r.confounder) {
    check(r.confounder->second);
    if (r.confounder->first >= r.objects.size()) throw DataError("confounder names a missing rule object");
    for (const auto& c : r.objects[r.confounder->first])
      if (c.group == r.confounder->second.group && c.value != r.confounder->second.value) {
        throw DataError("confounder contradicts its rule object");
      }
  }
}

std::vector<Condition> confounded_object(const ClassRule& r) {
  std::vector<Condition> o = r.objects[r.confounder->first];
  o.push_back(r.confounder->second);
  return o;
}

}  // namespace

LabeledSet make_concept_hans(const ConceptSchema& schema, const std::vector<ClassRule>& rules,
                             std::size_t n_per_class, Mode mode, std::uint64_t seed,
                             const ConceptHansOptions& opts) {
  if (rules.empty()) throw DataError("no class rules");
  if (!schema.presence) throw DataError("concept scenes need a presence column");
  for (const auto& r : rules) check_rule(schema, r);
  std::size_t max_objects = 0;
  for (const auto& r : rules) max_objects = std::max(max_objects, r.objects.size());
  const std::size_t distractors = std::min(opts.max_distractors, schema.slots - max_objects);

  std::vector<std::vector<Condition>> confounders_by_rule(rules.size());
  for (std::size_t j = 0; j < rules.size(); ++j)
    if (rules[j].confounder) confounders_by_rule[j] = confounded_object(rules[j]);

  Rng rng = make_rng(seed, mode == Mode::train ? "hans-train" : "hans-test");
  auto random_object = [&] {
    ObjectAttrs o(schema.groups.size());
    for (std::size_t g = 0; g < o.size(); ++g) {
      std::uniform_int_distribution<std::size_t> d(0, schema.groups[g].values.size() - 1);
      o[g] = d(rng);
    }
    return o;
  };

  const std::size_t n = n_per_class * rules.size(), width = schema.width();
  LabeledSet out;
  out.kind = "concept_hans";
  out.confounded = mode == Mode::train;
  out.num_classes = rules.size();
  out.inputs = Tensor(Shape{n, schema.slots, width});
  out.labels.reserve(n);
  out.ids.reserve(n);

  const std::uint64_t id_base = (derive_seed(seed, mode == Mode::train ? "hans-ids-train" : "hans-ids-test") & 0xFFFFFu) << 32;
  constexpr int kMaxTries = 10000;
  std::size_t row = 0;
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t k = 0; k < rules.size(); ++k) {
      const ClassRule& rule = rules[k];
      std::vector<ObjectAttrs> scene;
      bool ok = false;
      for (int attempt = 0; attempt < kMaxTries && !ok; ++attempt) {
        scene.clear();
        for (std::size_t t = 0; t < rule.objects.size(); ++t) {
          ObjectAttrs o = random_object();
          for (const auto& c : rule.objects[t]) o[c.group] = c.value;
          if (mode == Mode::train && rule.confounder && rule.confounder->first == t) {
            o[rule.confounder->second.group] = rule.confounder->second.value;
          }
          scene.push_back(std::move(o));
        }
        std::uniform_int_distribution<std::size_t> nd(0, distractors);
        const std::size_t extra = nd(rng);
        for (std::size_t d = 0; d < extra; ++d) scene.push_back(random_object());
        // In train mode a confounder pattern appears only on its own class object.
        bool clean = true;
        for (std::size_t o = 0; o < scene.size() && clean && mode == Mode::train; ++o) {
          for (std::size_t j = 0; j < rules.size() && clean; ++j) {
            if (!rules[j].confounder) continue;
            const bool own = j == k && o == rules[j].confounder->first;
            if (!own && object_matches(scene[o], confounders_by_rule[j])) clean = false;
          }
        }
        if (!clean) continue;
        ok = true;
        for (std::size_t j = 0; j < rules.size() && ok; ++j)
          if (j != k && scene_satisfies(scene, rules[j].objects)) ok = false;
      }
      if (!ok) throw DataError("could not sample a scene for class " + std::to_string(rule.class_id));

      std::vector<std::size_t> slots(schema.slots);
      std::iota(slots.begin(), slots.end(), 0);
      std::shuffle(slots.begin(), slots.end(), rng);
      double* z = out.inputs.data().data() + row * schema.slots * width;
      for (std::size_t o = 0; o < scene.size(); ++o) {
        double* slot = z + slots[o] * width;
        for (std::size_t g = 0; g < scene[o].size(); ++g) slot[schema.column(g, scene[o][g])] = 1.0;
        slot[schema.presence_column()] = 1.0;
      }
      out.labels.push_back(rule.class_id);
      out.ids.push_back(id_base | row);
      ++row;
    }
  }
  out.validate();
  return out;
}

Tensor cub_prototypes(const ConceptSchema& schema, std::size_t classes, std::uint64_t seed) {
  Rng rng = make_rng(seed, "cub-prototypes");
  const std::size_t width = schema.width();
  Tensor p(Shape{classes, width});
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t g = 0; g < schema.groups.size(); ++g) {
      std::uniform_int_distribution<std::size_t> d(0, schema.groups[g].values.size() - 1);
      p[k * width + schema.column(g, d(rng))] = 1.0;
    }
  }
  return p;
}

LabeledSet make_cub_noisy(const Tensor& prototypes, std::size_t n_per_class, std::uint64_t seed) {
  if (prototypes.rank() != 2) throw DataError("prototypes must be [classes, width]");
  for (double v : prototypes.data())
    if (v != 0.0 && v != 1.0) throw DataError("prototypes must be binary");
  const std::size_t classes = prototypes.dim(0), width = prototypes.dim(1);
  Rng rng = make_rng(seed, "cub-noise");
  const std::uint64_t id_base = (derive_seed(seed, "cub-ids") & 0xFFFFFu) << 32;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabeledSet out;
  out.kind = "cub_noisy";
  out.num_classes = classes;
  out.inputs = Tensor(Shape{classes * n_per_class, 1, width});
  std::size_t row = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      for (std::size_t a = 0; a < width; ++a) {
        out.inputs[row * width + a] = prototypes[k * width + a] + u(rng) >= 0.75 ? 1.0 : 0.0;
      }
      out.labels.push_back(static_cast<int>(k));
      out.ids.push_back(id_base | row);
    }
  }
  return out;
}

}  // namespace data
}  // namespace lsx
