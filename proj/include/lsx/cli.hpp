// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner behind the `lsx` binary: config files, dataset
// construction, run directories, metric tables and reports.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsx/concepts.hpp"
#include "lsx/datasets.hpp"
#include "lsx/evalmetrics.hpp"
#include "lsx/lsx.hpp"

namespace lsx::cli {

namespace fs = std::filesystem;

class ConfigParseError : public core::ConfigError {
 public:
  ConfigParseError(std::size_t line, const std::string& msg)
      : core::ConfigError("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Errors that should abort with the runtime exit code.
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataSection {
  std::string kind = "mnist";  // mnist | decoy | color | hans3 | cub
  std::uint64_t seed = 0;
  std::string mnist_dir = "data/mnist";
  std::size_t learner_size = 1200;
  std::size_t critic_size = 600;
  data::CriticRelation critic = data::CriticRelation::subset;
  std::size_t test_size = 0;        // 0 keeps the whole test set
  std::size_t pool_per_class = 200;  // generated kinds: training pool per class
  std::size_t test_per_class = 100;  // generated kinds: test samples per class
  std::size_t max_distractors = 4;
  std::size_t cub_classes = 10;
  // The run seed is mixed into the split so seeds see different subsets.
  bool split_per_seed = true;
};

struct ModelSection {
  std::size_t conv1 = 8;
  std::size_t conv2 = 16;
  std::size_t fc1 = 128;
  std::size_t hidden = 64;
};

struct EvalSection {
  bool ridge = true;
  bool iies = true;
  bool comp_suff = true;
  std::vector<double> b_set = eval::default_b_set();
  double alpha = 1.0;
  eval::IiesDenominator iies_denominator = eval::IiesDenominator::printed;
  std::size_t eval_size = 1000;  // test samples explained for the metrics; 0 = all
  std::uint64_t encoder_seed = 9973;
  std::size_t dump_per_class = 4;
};

struct OutSection {
  std::string dir = "runs";
};

struct ExperimentConfig {
  DataSection data;
  ModelSection model;
  core::LsxConfig lsx;
  EvalSection eval;
  OutSection out;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const fs::path& path);
// Every key with its resolved value; parse_config(format_config(c)) == c.
std::string format_config(const ExperimentConfig& cfg);

struct Datasets {
  data::LabeledSet learner;
  data::LabeledSet critic;
  data::LabeledSet test;
  std::optional<ConceptSchema> schema;
};

// Paths are resolved against `base` when relative.
Datasets build_datasets(const ExperimentConfig& cfg, std::uint64_t run_seed, const fs::path& base = {});
nets::ModelSpec model_spec(const ExperimentConfig& cfg, const Datasets& d);

// FNV-1a over labels, ids and input bytes.
std::uint64_t dataset_hash(const data::LabeledSet& set);

enum class TrainMode { vanilla, lsx };

struct TrainOptions {
  fs::path config;
  TrainMode mode = TrainMode::lsx;
  std::uint64_t seed = 0;
  std::optional<fs::path> out;  // run directory; default <out.dir>/<mode>-seed<N>
  bool overwrite = false;
};

struct TrainOutcome {
  fs::path run_dir;
  core::RunResult result;
  eval::MetricReport metrics;
};

TrainOutcome cmd_train(const TrainOptions& opts);

// Frozen encoder for IIES: the learner architecture trained on the base task
// (Fit only) with cfg.eval.encoder_seed.
nets::Model train_encoder(const ExperimentConfig& cfg, const Datasets& d);

// Explanations the metrics use: InputXGradient for CNN learners, Integrated
// Gradients over concepts otherwise. Labels are the true labels.
Tensor explain_for_metrics(const ExperimentConfig& cfg, const nets::Model& model, const data::LabeledSet& set);

eval::MetricReport compute_metrics(const ExperimentConfig& cfg, const nets::Model& model, const nets::Model& encoder,
                                   const data::LabeledSet& test, std::uint64_t seed);

// Appends one row to <run>/metrics.csv and rewrites <run>/explanations.
eval::MetricReport cmd_eval(const fs::path& run_dir, const std::optional<fs::path>& test_set = std::nullopt);

struct AggregateRow {
  std::string mode;
  std::size_t runs = 0;
  std::vector<std::pair<double, double>> columns;  // mean, std per metric
};

std::vector<std::string> aggregate_columns();
std::vector<AggregateRow> aggregate(const std::vector<eval::MetricReport>& rows);
std::string render_svg(const std::vector<AggregateRow>& rows, const std::string& title);
void cmd_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir, bool overwrite);

// Returns the number of files written.
std::size_t cmd_dump(const fs::path& run_dir, std::size_t n_per_class, bool overwrite);

// Writes learner.set, critic.set and test.set (with .meta sidecars).
void cmd_gen_data(const fs::path& config, std::uint64_t seed, const fs::path& out_dir, bool overwrite);

}  // namespace lsx::cli
