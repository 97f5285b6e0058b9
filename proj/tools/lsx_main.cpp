// SPDX-License-Identifier: Apache-2.0
//
// lsx train|eval|report|dump|gen-data
#include <CLI11.hpp>
#include <iostream>

#include "lsx/cli.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace lsx;
  CLI::App app{"Learning by self-explaining experiment runner"};
  app.require_subcommand(1);

  cli::TrainOptions train;
  bool vanilla = false, lsx_mode = false;
  std::string train_out;
  auto* t = app.add_subcommand("train", "Train a vanilla or LSX learner into a run directory");
  t->add_option("--config", train.config, "Experiment config file")->required();
  t->add_flag("--vanilla", vanilla, "Fit only, with the LSX run's epoch budget");
  t->add_flag("--lsx", lsx_mode, "Run the LSX loop");
  t->add_option("--seed", train.seed, "Run seed");
  t->add_option("--out", train_out, "Run directory");
  t->add_flag("--overwrite", train.overwrite, "Replace an existing run directory");

  std::string eval_run, eval_test;
  auto* e = app.add_subcommand("eval", "Append a metric row for a trained run");
  e->add_option("--run,run", eval_run, "Run directory")->required();
  e->add_option("--test", eval_test, "Saved test set (from gen-data) replacing the config's test set");

  std::vector<std::string> report_runs;
  std::string report_out;
  bool report_overwrite = false;
  auto* r = app.add_subcommand("report", "Aggregate runs into aggregate.csv and report.svg");
  r->add_option("runs", report_runs, "Run directories")->required();
  r->add_option("--out", report_out, "Output directory")->required();
  r->add_flag("--overwrite", report_overwrite, "Replace existing report files");

  std::string dump_run;
  std::size_t dump_n = 4;
  bool dump_overwrite = false;
  auto* d = app.add_subcommand("dump", "Export sampled explanations per class");
  d->add_option("--run,run", dump_run, "Run directory")->required();
  d->add_option("-n,--per-class", dump_n, "Explanations per class");
  d->add_flag("--overwrite", dump_overwrite, "Replace an existing dump");

  std::string gen_config, gen_out;
  std::uint64_t gen_seed = 0;
  bool gen_overwrite = false;
  auto* g = app.add_subcommand("gen-data", "Build and save the learner, critic and test sets");
  g->add_option("--config", gen_config, "Experiment config file")->required();
  g->add_option("--seed", gen_seed, "Run seed used for the split");
  g->add_option("--out", gen_out, "Output directory")->required();
  g->add_flag("--overwrite", gen_overwrite, "Replace an existing directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*t) {
      if (vanilla == lsx_mode) throw core::ConfigError("pass exactly one of --vanilla and --lsx");
      train.mode = vanilla ? cli::TrainMode::vanilla : cli::TrainMode::lsx;
      if (!train_out.empty()) train.out = train_out;
      const auto out = cli::cmd_train(train);
      std::cout << "run " << out.run_dir.string() << ": accuracy " << out.metrics.accuracy << "%\n";
    } else if (*e) {
      std::optional<std::filesystem::path> test;
      if (!eval_test.empty()) test = eval_test;
      const auto row = cli::cmd_eval(eval_run, test);
      std::cout << eval::to_csv_row(row) << "\n";
    } else if (*r) {
      std::vector<std::filesystem::path> dirs(report_runs.begin(), report_runs.end());
      cli::cmd_report(dirs, report_out, report_overwrite);
      std::cout << "wrote " << report_out << "/aggregate.csv and report.svg\n";
    } else if (*d) {
      const std::size_t n = cli::cmd_dump(dump_run, dump_n, dump_overwrite);
      std::cout << "wrote " << n << " files\n";
    } else if (*g) {
      cli::cmd_gen_data(gen_config, gen_seed, gen_out, gen_overwrite);
      std::cout << "wrote " << gen_out << "\n";
    }
  } catch (const core::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kConfigError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
