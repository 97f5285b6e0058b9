// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <map>

#include "lsx/logic.hpp"

namespace lsx::logic {

std::size_t Rule::num_conditions() const {
  std::size_t n = 0;
  for (const auto& o : objects) n += o.size();
  return n;
}

Rule make_rule(int class_id, std::vector<std::vector<Condition>> objects) {
  Rule r;
  r.class_id = class_id;
  for (auto& o : objects) std::sort(o.begin(), o.end());
  std::sort(objects.begin(), objects.end());
  r.objects = std::move(objects);
  return r;
}

void validate(const Rule& rule, const ConceptSchema& schema) {
  if (rule.objects.empty()) throw RuleError("rule has no objects");
  for (const auto& o : rule.objects) {
    if (o.empty()) throw RuleError("rule object has no conditions");
    for (std::size_t i = 0; i < o.size(); ++i) {
      if (o[i].group >= schema.groups.size() || o[i].value >= schema.groups[o[i].group].values.size()) {
        throw RuleError("condition outside the attribute schema");
      }
      for (std::size_t j = 0; j < i; ++j)
        if (o[i].group == o[j].group) throw RuleError("two conditions on group " + schema.groups[o[i].group].name);
    }
  }
}

std::string to_text(const Rule& rule, const ConceptSchema& schema) {
  validate(rule, schema);
  std::string s = "class" + std::to_string(rule.class_id) + "(X):- ";
  for (std::size_t i = 0; i < rule.objects.size(); ++i) {
    if (i) s += ',';
    s += "in(O" + std::to_string(i + 1) + ",X)";
  }
  for (std::size_t i = 0; i < rule.objects.size(); ++i) {
    for (const auto& c : rule.objects[i]) {
      s += ',' + schema.groups[c.group].name + "(O" + std::to_string(i + 1) + ',' +
           schema.groups[c.group].values[c.value] + ')';
    }
  }
  return s;
}

namespace {

class Cursor {
 public:
  explicit Cursor(std::string_view t) : t_(t) {}

  void skip_ws() {
    while (i_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[i_]))) ++i_;
  }
  bool done() {
    skip_ws();
    return i_ >= t_.size();
  }
  bool accept(std::string_view lit) {
    skip_ws();
    if (t_.substr(i_, lit.size()) != lit) return false;
    i_ += lit.size();
    return true;
  }
  void expect(std::string_view lit) {
    if (!accept(lit)) fail("expected '" + std::string(lit) + "'");
  }
  std::string ident() {
    skip_ws();
    const std::size_t start = i_;
    while (i_ < t_.size() && (std::isalnum(static_cast<unsigned char>(t_[i_])) || t_[i_] == '_' || t_[i_] == '-')) ++i_;
    if (start == i_) fail("expected an identifier");
    return std::string(t_.substr(start, i_ - start));
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw RuleError("rule text, column " + std::to_string(i_ + 1) + ": " + msg);
  }

 private:
  std::string_view t_;
  std::size_t i_ = 0;
};

std::size_t object_index(Cursor& c, const std::string& var) {
  if (var.size() < 2 || var[0] != 'O' || !std::all_of(var.begin() + 1, var.end(), ::isdigit)) {
    c.fail("bad object variable '" + var + "'");
  }
  const std::size_t k = std::stoul(var.substr(1));
  if (k == 0) c.fail("object variables start at O1");
  return k - 1;
}

}  // namespace

Rule parse_rule(std::string_view text, const ConceptSchema& schema) {
  Cursor c(text);
  const std::string head = c.ident();
  if (head.rfind("class", 0) != 0 || head.size() == 5 ||
      !std::all_of(head.begin() + 5, head.end(), ::isdigit)) {
    c.fail("rule head must be classK");
  }
  const int k = std::stoi(head.substr(5));
  c.expect("(");
  c.expect("X");
  c.expect(")");
  c.expect(":-");
  std::map<std::size_t, std::vector<Condition>> objs;
  std::vector<bool> declared;
  bool first = true;
  while (!c.done() && !c.accept(".")) {
    if (!first) c.expect(",");
    first = false;
    const std::string pred = c.ident();
    c.expect("(");
    const std::string var = c.ident();
    const std::size_t o = object_index(c, var);
    c.expect(",");
    const std::string arg = c.ident();
    c.expect(")");
    if (pred == "in") {
      if (arg != "X") c.fail("in/2 must reference X");
      if (declared.size() <= o) declared.resize(o + 1, false);
      declared[o] = true;
      objs[o];
      continue;
    }
    std::size_t g, v;
    try {
      g = schema.find_group(pred);
      v = schema.find_value(g, arg);
    } catch (const std::invalid_argument& e) {
      c.fail(e.what());
    }
    if (o >= declared.size() || !declared[o]) c.fail("object " + var + " used before in(" + var + ",X)");
    objs[o].push_back({g, v});
  }
  std::vector<std::vector<Condition>> objects;
  for (auto& [idx, conds] : objs) objects.push_back(std::move(conds));
  Rule r = make_rule(k, std::move(objects));
  validate(r, schema);
  return r;
}

}  // namespace lsx::logic
