// SPDX-License-Identifier: Apache-2.0
//
// Object-slot x attribute layout of concept matrices, shared by the concept
// data generators and the rule machinery.
#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lsx {

struct AttrGroup {
  std::string name;
  std::vector<std::string> values;
};

// Columns are the one-hot blocks of each group in order, then an optional
// trailing presence column.
struct ConceptSchema {
  std::vector<AttrGroup> groups;
  bool presence = true;
  std::size_t slots = 10;

  std::size_t width() const;
  std::size_t offset(std::size_t group) const;
  std::size_t column(std::size_t group, std::size_t value) const { return offset(group) + value; }
  std::size_t presence_column() const;
  // (group, value) of a non-presence column.
  std::optional<std::pair<std::size_t, std::size_t>> locate(std::size_t column) const;
  std::size_t find_group(const std::string& name) const;
  std::size_t find_value(std::size_t group, const std::string& name) const;

  // shape(3) size(2) material(2) color(8) + presence: 16 columns.
  static ConceptSchema clevr(std::size_t slots = 10);
  // 28 groups of 4 values, one slot, no presence column.
  static ConceptSchema cub();
};

struct Condition {
  std::size_t group = 0;
  std::size_t value = 0;
  auto operator<=>(const Condition&) const = default;
};

// One object described by a value index per attribute group.
using ObjectAttrs = std::vector<std::size_t>;

bool object_matches(const ObjectAttrs& obj, const std::vector<Condition>& conds);

// True if the templates can be matched to distinct objects.
bool scene_satisfies(const std::vector<ObjectAttrs>& scene, const std::vector<std::vector<Condition>>& templates);

}  // namespace lsx
