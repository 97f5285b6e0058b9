// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "lsx/attribution.hpp"
#include "lsx/cli.hpp"

namespace lsx::cli {
namespace {

constexpr std::uint64_t kTestIdBase = 1ull << 32;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw RunError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw RunError("cannot write " + p.string());
  out << text;
  if (!out) throw RunError("write failed for " + p.string());
}

void prepare_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!overwrite) throw RunError(dir.string() + " already exists; pass --overwrite to replace it");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

fs::path resolve_mnist(const std::string& dir, const fs::path& base) {
  fs::path p(dir);
  if (p.is_absolute()) return p;
  if (fs::exists(p)) return fs::absolute(p);
  if (!base.empty() && fs::exists(base / p)) return fs::absolute(base / p);
  // Configs live one level below the repository root.
  if (!base.empty() && fs::exists(base.parent_path() / p)) return fs::absolute(base.parent_path() / p);
  throw core::ConfigError("MNIST directory '" + dir + "' not found");
}

// Rows of `set` whose ids do not appear in `drop`.
data::LabeledSet without(const data::LabeledSet& set, const data::LabeledSet& drop) {
  std::unordered_set<std::uint64_t> ids(drop.ids.begin(), drop.ids.end());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (!ids.count(set.ids[i])) rows.push_back(i);
  return set.subset(rows);
}

data::LabeledSet generated(const ExperimentConfig& cfg, const ConceptSchema& schema, std::size_t per_class,
                           data::Mode mode, std::uint64_t seed) {
  if (cfg.data.kind == "hans3") {
    data::ConceptHansOptions o;
    o.max_distractors = cfg.data.max_distractors;
    return data::make_concept_hans(schema, data::hans3_rules(schema), per_class, mode, seed, o);
  }
  const Tensor protos = data::cub_prototypes(schema, cfg.data.cub_classes, derive_seed(cfg.data.seed, "cub"));
  return data::make_cub_noisy(protos, per_class, seed);
}

struct RunInfo {
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::lsx;
};

std::string mode_name(TrainMode m) { return m == TrainMode::lsx ? "lsx" : "vanilla"; }

RunInfo read_run_info(const fs::path& run_dir) {
  RunInfo info;
  std::istringstream in(read_file(run_dir / "run.info"));
  std::string line;
  bool have_seed = false, have_mode = false;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "seed") {
      info.seed = std::stoull(v);
      have_seed = true;
    } else if (k == "mode") {
      info.mode = v == "lsx" ? TrainMode::lsx : TrainMode::vanilla;
      have_mode = true;
    }
  }
  if (!have_seed || !have_mode) throw RunError(run_dir.string() + "/run.info is incomplete");
  return info;
}

nets::Model load_model(const fs::path& ckpt, const nets::ModelSpec& spec) {
  if (!fs::exists(ckpt)) throw RunError("missing checkpoint " + ckpt.string());
  nets::Model m = nets::Model::init(spec, 0);
  m.assign(nets::load_checkpoint(ckpt));
  return m;
}

std::vector<logic::Rule> read_rules(const fs::path& path, const ConceptSchema& schema) {
  std::vector<logic::Rule> rules;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rules.push_back(logic::parse_rule(line, schema));
  return rules;
}

// n samples per class, drawn with a seed-derived stream.
std::vector<std::size_t> per_class_sample(const data::LabeledSet& set, std::size_t n, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(set.num_classes);
  for (std::size_t i = 0; i < set.size(); ++i) by_class.at(static_cast<std::size_t>(set.labels[i])).push_back(i);
  Rng rng = make_rng(seed, "dump");
  std::vector<std::size_t> rows;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    if (n > by_class[k].size()) {
      throw RunError("class " + std::to_string(k) + " has " + std::to_string(by_class[k].size()) + " samples, " +
                     std::to_string(n) + " requested");
    }
    std::shuffle(by_class[k].begin(), by_class[k].end(), rng);
    rows.insert(rows.end(), by_class[k].begin(), by_class[k].begin() + static_cast<std::ptrdiff_t>(n));
  }
  return rows;
}

// Writes explanation CSV plus PGMs (images) or per-class rule files
// (concepts) into `dir`. Returns the number of PGM or rule files.
std::size_t write_explanations(const fs::path& dir, const ExperimentConfig& cfg, const nets::Model& model,
                               const data::LabeledSet& test, std::size_t n_per_class, std::uint64_t seed,
                               const fs::path& run_dir) {
  fs::create_directories(dir);
  const auto rows = per_class_sample(test, n_per_class, seed);
  const data::LabeledSet picked = test.subset(rows);
  const Tensor values = explain_for_metrics(cfg, model, picked);
  const auto predicted = nets::argmax_rows(nets::predict(model, core::model_inputs(model, picked.inputs)));
  const auto maps = attr::to_maps(values.reshaped([&] {
    Shape s{picked.size()};
    const Shape ss = picked.sample_shape();
    s.insert(s.end(), ss.begin(), ss.end());
    return s;
  }()), picked, predicted);
  attr::write_csv(dir / "explanations.csv", maps);
  std::size_t files = 0;
  if (cfg.lsx.instantiation == core::Instantiation::cnn) {
    std::vector<std::size_t> seen(test.num_classes, 0);
    for (const auto& m : maps) {
      const std::size_t k = static_cast<std::size_t>(m.label);
      attr::write_pgm(dir / ("class" + std::to_string(k) + "_" + std::to_string(seen[k]++) + ".pgm"), m);
      ++files;
    }
    return files;
  }
  const fs::path rules_path = run_dir / "rules.txt";
  if (!fs::exists(rules_path)) return files;
  const ExperimentConfig& c = cfg;
  const ConceptSchema schema = c.data.kind == "hans3" ? ConceptSchema::clevr() : ConceptSchema::cub();
  for (const auto& r : read_rules(rules_path, schema)) {
    write_file(dir / ("rules_class" + std::to_string(r.class_id) + ".txt"), logic::to_text(r, schema) + "\n");
    ++files;
  }
  return files;
}

std::string metrics_csv(const std::vector<eval::MetricReport>& rows) {
  std::string s = eval::csv_header() + "\n";
  for (const auto& r : rows) s += eval::to_csv_row(r) + "\n";
  return s;
}

}  // namespace

std::uint64_t dataset_hash(const data::LabeledSet& set) {
  std::uint64_t h = 1469598103934665603ull;
  auto feed = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  feed(set.labels.data(), set.labels.size() * sizeof(int));
  feed(set.ids.data(), set.ids.size() * sizeof(std::uint64_t));
  feed(set.inputs.storage().data(), set.inputs.numel() * sizeof(double));
  return h;
}

Datasets build_datasets(const ExperimentConfig& cfg, std::uint64_t run_seed, const fs::path& base) {
  const auto& dc = cfg.data;
  const std::uint64_t split_seed =
      dc.split_per_seed ? derive_seed(dc.seed, "split-" + std::to_string(run_seed)) : derive_seed(dc.seed, "split");
  data::SplitPolicy policy{dc.learner_size, dc.critic_size, dc.critic};
  Datasets d;
  data::LabeledSet pool, test;
  if (dc.kind == "mnist" || dc.kind == "decoy" || dc.kind == "color") {
    const fs::path dir = resolve_mnist(dc.mnist_dir, base);
    pool = data::load_idx(dir / "train-images-idx3-ubyte.gz", dir / "train-labels-idx1-ubyte.gz");
    test = data::load_idx(dir / "t10k-images-idx3-ubyte.gz", dir / "t10k-labels-idx1-ubyte.gz", kTestIdBase);
    if (dc.kind == "decoy") {
      pool = data::make_decoy(pool, data::Mode::train, derive_seed(dc.seed, "decoy-train"));
      test = data::make_decoy(test, data::Mode::test, derive_seed(dc.seed, "decoy-test"));
    } else if (dc.kind == "color") {
      pool = data::make_color(pool, data::Mode::train, derive_seed(dc.seed, "color-train"));
      test = data::make_color(test, data::Mode::test, derive_seed(dc.seed, "color-test"));
    }
  } else {
    d.schema = dc.kind == "hans3" ? ConceptSchema::clevr() : ConceptSchema::cub();
    pool = generated(cfg, *d.schema, dc.pool_per_class, data::Mode::train, derive_seed(dc.seed, "pool"));
    test = generated(cfg, *d.schema, dc.test_per_class, data::Mode::test, derive_seed(dc.seed, "test"));
  }
  if (dc.critic == data::CriticRelation::deconfounded_heldout) {
    // The critic draws from unconfounded data; test keeps the rest of it.
    data::Split s = data::make_split(pool, policy, split_seed, &test);
    test = without(test, s.critic);
    d.learner = std::move(s.learner);
    d.critic = std::move(s.critic);
  } else {
    data::Split s = data::make_split(pool, policy, split_seed);
    d.learner = std::move(s.learner);
    d.critic = std::move(s.critic);
  }
  if (dc.test_size > 0 && dc.test_size < test.size()) {
    test = test.subset(data::stratified_sample(test.labels, test.num_classes, dc.test_size, derive_seed(dc.seed, "test-subset")));
  }
  d.test = std::move(test);
  d.learner.validate();
  d.critic.validate();
  d.test.validate();
  return d;
}

nets::ModelSpec model_spec(const ExperimentConfig& cfg, const Datasets& d) {
  const Shape s = d.learner.sample_shape();
  if (cfg.lsx.instantiation == core::Instantiation::cnn) {
    if (s.size() != 3) throw core::ConfigError("CNN learner needs [C, H, W] samples");
    nets::CnnSpec c;
    c.channels = s[0];
    c.height = s[1];
    c.width = s[2];
    c.classes = d.learner.num_classes;
    c.conv1 = cfg.model.conv1;
    c.conv2 = cfg.model.conv2;
    c.fc1 = cfg.model.fc1;
    return c;
  }
  nets::MlpSpec m;
  m.inputs = 1;
  for (std::size_t v : s) m.inputs *= v;
  m.hidden = cfg.model.hidden;
  m.classes = d.learner.num_classes;
  return m;
}

nets::Model train_encoder(const ExperimentConfig& cfg, const Datasets& d) {
  core::LsxConfig ec = cfg.lsx;
  ec.seed = cfg.eval.encoder_seed;
  core::RunData rd;
  rd.learner = &d.learner;
  return core::run_vanilla(ec, model_spec(cfg, d), rd, ec.total_epochs()).learner;
}

Tensor explain_for_metrics(const ExperimentConfig& cfg, const nets::Model& model, const data::LabeledSet& set) {
  const Tensor x = core::model_inputs(model, set.inputs);
  if (cfg.lsx.instantiation == core::Instantiation::cnn) return attr::input_x_gradient(model, x, set.labels);
  return attr::integrated_gradients(model, x, set.labels, cfg.lsx.ig_steps);
}

eval::MetricReport compute_metrics(const ExperimentConfig& cfg, const nets::Model& model, const nets::Model& encoder,
                                   const data::LabeledSet& test, std::uint64_t seed) {
  eval::MetricReport r;
  r.seed = seed;
  r.b_set = cfg.eval.b_set;
  r.accuracy = 100.0 * core::accuracy(model, test);
  data::LabeledSet sub = test;
  if (cfg.eval.eval_size > 0 && cfg.eval.eval_size < test.size()) {
    sub = test.subset(data::stratified_sample(test.labels, test.num_classes, cfg.eval.eval_size,
                                              derive_seed(seed, "eval-subset")));
  }
  const Tensor expl = explain_for_metrics(cfg, model, sub);
  if (cfg.eval.ridge) r.ridge_accuracy = eval::ridge_holdout(expl, sub.labels, sub.num_classes, cfg.eval.alpha, seed);
  if (cfg.eval.iies) r.iies = eval::iies(expl, sub.labels, encoder, cfg.eval.iies_denominator);
  const bool cnn = cfg.lsx.instantiation == core::Instantiation::cnn;
  r.variant = cnn ? eval::Variant::continuous : eval::Variant::discrete;
  if (cfg.eval.comp_suff) {
    const Tensor x = core::model_inputs(model, sub.inputs);
    const eval::CompSuff cs = cnn ? eval::comp_suff_continuous(model, x, sub.labels, expl, cfg.eval.b_set,
                                                               derive_seed(seed, "comp-suff"))
                                  : eval::comp_suff_discrete(model, x, expl, cfg.eval.b_set);
    r.comp = cs.comp;
    r.suff = cs.suff;
  }
  r.validate();
  return r;
}

TrainOutcome cmd_train(const TrainOptions& opts) {
  ExperimentConfig cfg = load_config(opts.config);
  const fs::path base = fs::absolute(opts.config).parent_path();
  if (cfg.data.kind == "mnist" || cfg.data.kind == "decoy" || cfg.data.kind == "color") {
    cfg.data.mnist_dir = resolve_mnist(cfg.data.mnist_dir, base).string();
  }
  if (opts.seed == cfg.eval.encoder_seed) throw core::ConfigError("run seed equals eval.encoder_seed");
  const fs::path run_dir = opts.out ? *opts.out : fs::path(cfg.out.dir) / (mode_name(opts.mode) + "-seed" + std::to_string(opts.seed));
  prepare_dir(run_dir, opts.overwrite);
  fs::create_directories(run_dir / "checkpoints");
  write_file(run_dir / "config.resolved", format_config(cfg));
  write_file(run_dir / "run.info", "seed=" + std::to_string(opts.seed) + "\nmode=" + mode_name(opts.mode) + "\n");

  const Datasets d = build_datasets(cfg, opts.seed, base);
  core::LsxConfig lc = cfg.lsx;
  lc.seed = opts.seed;
  core::RunData rd;
  rd.learner = &d.learner;
  rd.critic = &d.critic;
  rd.schema = d.schema ? &*d.schema : nullptr;
  rd.checkpoint = [&](const std::string& tag, const nets::Model& m) {
    nets::save_checkpoint(run_dir / "checkpoints" / (tag + ".ckpt"), m.params());
  };
  const nets::ModelSpec spec = model_spec(cfg, d);

  TrainOutcome out{run_dir, {}, {}};
  try {
    out.result = opts.mode == TrainMode::lsx ? core::run_lsx(lc, spec, rd) : core::run_vanilla(lc, spec, rd, lc.total_epochs());
  } catch (const core::ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw RunError(e.what());
  }

  char hashes[160];
  std::snprintf(hashes, sizeof hashes, "# dataset learner=%016llx critic=%016llx test=%016llx\n",
                static_cast<unsigned long long>(dataset_hash(d.learner)),
                static_cast<unsigned long long>(dataset_hash(d.critic)),
                static_cast<unsigned long long>(dataset_hash(d.test)));
  write_file(run_dir / "events.log", hashes + core::format_events(out.result.report.events));
  if (d.schema && !out.result.report.rules.empty()) {
    std::string text;
    for (const auto& r : out.result.report.rules) text += logic::to_text(r, *d.schema) + "\n";
    write_file(run_dir / "rules.txt", text);
  }

  const nets::Model encoder = train_encoder(cfg, d);
  out.metrics = compute_metrics(cfg, out.result.learner, encoder, d.test, opts.seed);
  out.metrics.run = run_dir.filename().string();
  out.metrics.mode = mode_name(opts.mode);
  write_file(run_dir / "metrics.csv", metrics_csv({out.metrics}));
  write_explanations(run_dir / "explanations", cfg, out.result.learner, d.test, cfg.eval.dump_per_class, opts.seed, run_dir);
  write_file(run_dir / "report.svg", render_svg(aggregate({out.metrics}), out.metrics.run));
  return out;
}

eval::MetricReport cmd_eval(const fs::path& run_dir, const std::optional<fs::path>& test_set) {
  const ExperimentConfig cfg = load_config(run_dir / "config.resolved");
  const RunInfo info = read_run_info(run_dir);
  Datasets d = build_datasets(cfg, info.seed);
  if (test_set) d.test = data::load_set(*test_set);
  const nets::ModelSpec spec = model_spec(cfg, d);
  const nets::Model model = load_model(run_dir / "checkpoints" / "final.ckpt", spec);
  const nets::Model encoder = train_encoder(cfg, d);
  eval::MetricReport r = compute_metrics(cfg, model, encoder, d.test, info.seed);
  r.run = run_dir.filename().string();
  r.mode = mode_name(info.mode);

  const fs::path csv = run_dir / "metrics.csv";
  std::string text = fs::exists(csv) ? read_file(csv) : eval::csv_header() + "\n";
  text += eval::to_csv_row(r) + "\n";
  write_file(csv, text);
  fs::remove_all(run_dir / "explanations");
  write_explanations(run_dir / "explanations", cfg, model, d.test, cfg.eval.dump_per_class, info.seed, run_dir);
  return r;
}

std::size_t cmd_dump(const fs::path& run_dir, std::size_t n_per_class, bool overwrite) {
  if (n_per_class == 0) throw core::ConfigError("n per class must be positive");
  const ExperimentConfig cfg = load_config(run_dir / "config.resolved");
  const RunInfo info = read_run_info(run_dir);
  const Datasets d = build_datasets(cfg, info.seed);
  const nets::Model model = load_model(run_dir / "checkpoints" / "final.ckpt", model_spec(cfg, d));
  const fs::path dir = run_dir / ("dump-n" + std::to_string(n_per_class));
  prepare_dir(dir, overwrite);
  return write_explanations(dir, cfg, model, d.test, n_per_class, info.seed, run_dir);
}

void cmd_gen_data(const fs::path& config, std::uint64_t seed, const fs::path& out_dir, bool overwrite) {
  const ExperimentConfig cfg = load_config(config);
  const Datasets d = build_datasets(cfg, seed, fs::absolute(config).parent_path());
  prepare_dir(out_dir, overwrite);
  data::save_set(out_dir / "learner.set", d.learner, seed);
  data::save_set(out_dir / "critic.set", d.critic, seed);
  data::save_set(out_dir / "test.set", d.test, seed);
}

}  // namespace lsx::cli
