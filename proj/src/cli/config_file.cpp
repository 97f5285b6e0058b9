// SPDX-License-Identifier: Apache-2.0
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lsx/cli.hpp"

namespace lsx::cli {
namespace {

struct ValueError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_int(const std::string& v) {
  T out{};
  if (v.empty() || v[0] == '-') throw ValueError("expected a non-negative integer, got '" + v + "'");
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ValueError("expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw ValueError("");
    return d;
  } catch (const std::exception&) {
    throw ValueError("expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValueError("expected true or false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class E>
using Names = std::vector<std::pair<E, const char*>>;

template <class E>
E parse_enum(const std::string& v, const Names<E>& names) {
  std::string opts;
  for (const auto& [e, n] : names) {
    if (v == n) return e;
    opts += (opts.empty() ? "" : "|") + std::string(n);
  }
  throw ValueError("expected one of " + opts + ", got '" + v + "'");
}

template <class E>
std::string enum_name(E v, const Names<E>& names) {
  for (const auto& [e, n] : names)
    if (e == v) return n;
  return "?";
}

const Names<data::CriticRelation> kRelations = {{data::CriticRelation::subset, "subset"},
                                                {data::CriticRelation::disjoint, "disjoint"},
                                                {data::CriticRelation::deconfounded_heldout, "deconfounded"}};
const Names<core::Instantiation> kInst = {{core::Instantiation::cnn, "cnn"}, {core::Instantiation::nesy, "nesy"}};
const Names<nets::OptimKind> kOptim = {{nets::OptimKind::adam, "adam"}, {nets::OptimKind::sgd, "sgd"}};
const Names<logic::Aggregation> kAgg = {
    {logic::Aggregation::mean, "mean"}, {logic::Aggregation::min, "min"}, {logic::Aggregation::softmin, "softmin"}};
const Names<eval::IiesDenominator> kDenom = {{eval::IiesDenominator::printed, "printed"},
                                             {eval::IiesDenominator::corrected, "corrected"}};

struct Key {
  std::string section;
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T, class Ref>
Key key(std::string section, std::string name, Ref ref) {
  Key k{std::move(section), std::move(name), nullptr, nullptr};
  k.set = [ref](ExperimentConfig& c, const std::string& v) {
    T& field = ref(c);
    if constexpr (std::is_same_v<T, bool>) {
      field = parse_bool(v);
    } else if constexpr (std::is_same_v<T, double>) {
      field = parse_double(v);
    } else if constexpr (std::is_same_v<T, std::string>) {
      field = v;
    } else {
      field = parse_int<T>(v);
    }
  };
  k.get = [ref](const ExperimentConfig& c) -> std::string {
    const T& field = ref(const_cast<ExperimentConfig&>(c));
    if constexpr (std::is_same_v<T, bool>) {
      return field ? "true" : "false";
    } else if constexpr (std::is_same_v<T, double>) {
      return fmt_double(field);
    } else if constexpr (std::is_same_v<T, std::string>) {
      return field;
    } else {
      return std::to_string(field);
    }
  };
  return k;
}

template <class E, class Ref>
Key enum_key(std::string section, std::string name, const Names<E>& names, Ref ref) {
  Key k{std::move(section), std::move(name), nullptr, nullptr};
  k.set = [ref, &names](ExperimentConfig& c, const std::string& v) { ref(c) = parse_enum(v, names); };
  k.get = [ref, &names](const ExperimentConfig& c) { return enum_name(ref(const_cast<ExperimentConfig&>(c)), names); };
  return k;
}

const std::vector<Key>& keys() {
  using C = ExperimentConfig;
  static const std::vector<Key> all = [] {
    std::vector<Key> k;
    k.push_back(key<std::string>("data", "kind", [](C& c) -> auto& { return c.data.kind; }));
    k.push_back(key<std::uint64_t>("data", "seed", [](C& c) -> auto& { return c.data.seed; }));
    k.push_back(key<std::string>("data", "mnist_dir", [](C& c) -> auto& { return c.data.mnist_dir; }));
    k.push_back(key<std::size_t>("data", "learner_size", [](C& c) -> auto& { return c.data.learner_size; }));
    k.push_back(key<std::size_t>("data", "critic_size", [](C& c) -> auto& { return c.data.critic_size; }));
    k.push_back(enum_key("data", "critic", kRelations, [](C& c) -> auto& { return c.data.critic; }));
    k.push_back(key<std::size_t>("data", "test_size", [](C& c) -> auto& { return c.data.test_size; }));
    k.push_back(key<std::size_t>("data", "pool_per_class", [](C& c) -> auto& { return c.data.pool_per_class; }));
    k.push_back(key<std::size_t>("data", "test_per_class", [](C& c) -> auto& { return c.data.test_per_class; }));
    k.push_back(key<std::size_t>("data", "max_distractors", [](C& c) -> auto& { return c.data.max_distractors; }));
    k.push_back(key<std::size_t>("data", "cub_classes", [](C& c) -> auto& { return c.data.cub_classes; }));
    k.push_back(key<bool>("data", "split_per_seed", [](C& c) -> auto& { return c.data.split_per_seed; }));

    k.push_back(enum_key("model", "instantiation", kInst, [](C& c) -> auto& { return c.lsx.instantiation; }));
    k.push_back(key<std::size_t>("model", "conv1", [](C& c) -> auto& { return c.model.conv1; }));
    k.push_back(key<std::size_t>("model", "conv2", [](C& c) -> auto& { return c.model.conv2; }));
    k.push_back(key<std::size_t>("model", "fc1", [](C& c) -> auto& { return c.model.fc1; }));
    k.push_back(key<std::size_t>("model", "hidden", [](C& c) -> auto& { return c.model.hidden; }));

    k.push_back(key<std::size_t>("lsx", "iterations", [](C& c) -> auto& { return c.lsx.iterations; }));
    k.push_back(key<double>("lsx", "lambda", [](C& c) -> auto& { return c.lsx.lambda; }));
    k.push_back(key<double>("lsx", "lambda_ft", [](C& c) -> auto& { return c.lsx.lambda_ft; }));
    k.push_back(key<double>("lsx", "delta", [](C& c) -> auto& { return c.lsx.delta; }));
    k.push_back(key<bool>("lsx", "critic_reinit", [](C& c) -> auto& { return c.lsx.critic_reinit; }));
    k.push_back(key<std::size_t>("lsx", "critic_epochs", [](C& c) -> auto& { return c.lsx.critic_epochs; }));
    k.push_back(key<std::size_t>("lsx", "revise_epochs", [](C& c) -> auto& { return c.lsx.revise_epochs; }));
    k.push_back(key<std::size_t>("lsx", "fit_epochs", [](C& c) -> auto& { return c.lsx.fit_epochs; }));
    k.push_back(key<std::size_t>("lsx", "finetune_epochs", [](C& c) -> auto& { return c.lsx.finetune_epochs; }));
    k.push_back(key<double>("lsx", "tolerance", [](C& c) -> auto& { return c.lsx.tolerance; }));
    k.push_back(key<std::size_t>("lsx", "batch_size", [](C& c) -> auto& { return c.lsx.batch_size; }));
    k.push_back(key<std::size_t>("lsx", "critic_batch_size", [](C& c) -> auto& { return c.lsx.critic_batch_size; }));
    k.push_back(enum_key("lsx", "optimizer", kOptim, [](C& c) -> auto& { return c.lsx.learner_opt.kind; }));
    k.push_back(key<double>("lsx", "lr", [](C& c) -> auto& { return c.lsx.learner_opt.lr; }));
    k.push_back(enum_key("lsx", "critic_optimizer", kOptim, [](C& c) -> auto& { return c.lsx.critic_opt.kind; }));
    k.push_back(key<double>("lsx", "critic_lr", [](C& c) -> auto& { return c.lsx.critic_opt.lr; }));
    k.push_back(key<bool>("lsx", "critic_normalize", [](C& c) -> auto& { return c.lsx.critic_normalize; }));
    k.push_back(key<bool>("lsx", "random_critic", [](C& c) -> auto& { return c.lsx.random_critic; }));
    k.push_back(key<std::size_t>("lsx", "ig_steps", [](C& c) -> auto& { return c.lsx.ig_steps; }));
    k.push_back(key<std::size_t>("lsx", "max_objects", [](C& c) -> auto& { return c.lsx.caps.max_objects; }));
    k.push_back(key<std::size_t>("lsx", "max_attrs", [](C& c) -> auto& { return c.lsx.caps.max_attrs; }));
    k.push_back(enum_key("lsx", "aggregation", kAgg, [](C& c) -> auto& { return c.lsx.aggregation; }));

    k.push_back(key<bool>("eval", "ridge", [](C& c) -> auto& { return c.eval.ridge; }));
    k.push_back(key<bool>("eval", "iies", [](C& c) -> auto& { return c.eval.iies; }));
    k.push_back(key<bool>("eval", "comp_suff", [](C& c) -> auto& { return c.eval.comp_suff; }));
    {
      Key b{"eval", "b", nullptr, nullptr};
      b.set = [](C& c, const std::string& v) {
        c.eval.b_set.clear();
        std::istringstream in(v);
        std::string item;
        while (std::getline(in, item, ',')) c.eval.b_set.push_back(parse_double(trim(item)));
        if (c.eval.b_set.empty()) throw ValueError("B set is empty");
      };
      b.get = [](const C& c) {
        std::string s;
        for (std::size_t i = 0; i < c.eval.b_set.size(); ++i) s += (i ? "," : "") + fmt_double(c.eval.b_set[i]);
        return s;
      };
      k.push_back(std::move(b));
    }
    k.push_back(key<double>("eval", "alpha", [](C& c) -> auto& { return c.eval.alpha; }));
    k.push_back(enum_key("eval", "iies_denominator", kDenom, [](C& c) -> auto& { return c.eval.iies_denominator; }));
    k.push_back(key<std::size_t>("eval", "eval_size", [](C& c) -> auto& { return c.eval.eval_size; }));
    k.push_back(key<std::uint64_t>("eval", "encoder_seed", [](C& c) -> auto& { return c.eval.encoder_seed; }));
    k.push_back(key<std::size_t>("eval", "dump_per_class", [](C& c) -> auto& { return c.eval.dump_per_class; }));

    k.push_back(key<std::string>("out", "dir", [](C& c) -> auto& { return c.out.dir; }));
    return k;
  }();
  return all;
}

void validate(const ExperimentConfig& c) {
  const auto& kind = c.data.kind;
  const bool image = kind == "mnist" || kind == "decoy" || kind == "color";
  const bool symbolic = kind == "hans3" || kind == "cub";
  if (!image && !symbolic) throw core::ConfigError("data.kind must be mnist, decoy, color, hans3 or cub");
  if (image && c.lsx.instantiation != core::Instantiation::cnn) {
    throw core::ConfigError("image datasets need model.instantiation = cnn");
  }
  if (symbolic && c.lsx.instantiation != core::Instantiation::nesy) {
    throw core::ConfigError("concept datasets need model.instantiation = nesy");
  }
  if (c.data.learner_size == 0 || c.data.critic_size == 0) throw core::ConfigError("set sizes must be positive");
  if (c.model.conv1 == 0 || c.model.conv2 == 0 || c.model.fc1 == 0) throw core::ConfigError("layer widths must be positive");
  if (!(c.eval.alpha > 0.0)) throw core::ConfigError("eval.alpha must be positive");
  for (double q : c.eval.b_set)
    if (!(q > 0.0 && q <= 100.0)) throw core::ConfigError("eval.b entries must lie in (0, 100]");
  if (c.out.dir.empty()) throw core::ConfigError("out.dir is empty");
  c.lsx.validate();
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::map<std::string, const Key*> index;
  for (const auto& k : keys()) index[k.section + "." + k.name] = &k;
  std::map<std::string, std::size_t> seen;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigParseError(lineno, "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section != "data" && section != "model" && section != "lsx" && section != "eval" && section != "out") {
        throw ConfigParseError(lineno, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigParseError(lineno, "expected key = value");
    if (section.empty()) throw ConfigParseError(lineno, "key outside any section");
    const std::string name = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const std::string full = section + "." + name;
    const auto it = index.find(full);
    if (it == index.end()) throw ConfigParseError(lineno, "unknown key '" + name + "' in [" + section + "]");
    if (const auto prev = seen.find(full); prev != seen.end()) {
      throw ConfigParseError(lineno, "duplicate key '" + full + "' (first set on line " + std::to_string(prev->second) + ")");
    }
    seen[full] = lineno;
    try {
      it->second->set(cfg, value);
    } catch (const ValueError& e) {
      throw ConfigParseError(lineno, full + ": " + e.what());
    }
  }
  try {
    validate(cfg);
  } catch (const core::ConfigError& e) {
    throw core::ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw core::ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& cfg) {
  std::string out, section;
  for (const auto& k : keys()) {
    if (k.section != section) {
      if (!section.empty()) out += '\n';
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += k.name + " = " + k.get(cfg) + "\n";
  }
  return out;
}

}  // namespace lsx::cli
