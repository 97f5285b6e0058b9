// SPDX-License-Identifier: Apache-2.0
//
// The Fit / Explain / Reflect / Revise loop for the attribution-based CNN
// instantiation and the rule-based concept instantiation.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lsx/datasets.hpp"
#include "lsx/logic.hpp"
#include "lsx/nets.hpp"
#include "lsx/rng.hpp"

namespace lsx::core {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Instantiation { cnn, nesy };

struct LsxConfig {
  Instantiation instantiation = Instantiation::cnn;
  std::size_t iterations = 1;  // T
  double lambda = 100.0;
  double lambda_ft = 10.0;
  double delta = 0.2;
  bool critic_reinit = true;
  std::size_t critic_epochs = 1;
  std::size_t revise_epochs = 1;
  std::size_t fit_epochs = 5;
  std::size_t finetune_epochs = 1;
  double tolerance = 1e-4;  // on the validation base loss; 0 disables the check
  std::size_t batch_size = 64;
  std::size_t critic_batch_size = 32;
  nets::OptimConfig learner_opt;
  nets::OptimConfig critic_opt;
  // Critic sees each explanation divided by its max |value| (constant factor).
  bool critic_normalize = true;
  // Critic replaced by one that guesses: fixed random logits per sample.
  bool random_critic = false;
  std::size_t ig_steps = 50;
  logic::Caps caps;
  logic::Aggregation aggregation = logic::Aggregation::mean;
  std::uint64_t seed = 0;

  void validate() const;
  // Optimizer epochs a fit-only run needs to match this configuration.
  std::size_t total_epochs() const;
};

// Learner model with the optimizer state and data-order stream that persist
// across every phase of a run.
struct Learner {
  nets::Model model;
  nets::Optimizer opt;
  Rng order;

  static Learner create(const nets::ModelSpec& spec, const LsxConfig& cfg);
};

struct Event {
  std::size_t iteration = 0;  // 0 for fit, 1..T inside the loop
  std::string module;         // fit | explain | reflect | revise | finetune_lock | converged
  std::string detail;         // space-separated key=value pairs
};

struct CnnFeedback {
  nets::Model critic;
  double critic_loss = 0.0;      // batch-averaged critic CE over the Reflect epoch
  double critic_accuracy = 0.0;  // on the explanations after training, in [0, 1]
  bool random = false;
};

struct RuleFeedback {
  std::vector<logic::Rule> rules;  // index = class
  std::vector<std::vector<logic::RuleScore>> scores;
};

using Feedback = std::variant<CnnFeedback, RuleFeedback>;

// Explanations of the critic set: attribution maps (CNN) or candidate rules.
using Explanations = std::variant<Tensor, logic::CandidateSet>;

struct IterationRecord {
  std::size_t iteration = 0;
  double critic_loss = 0.0;
  double critic_accuracy = 0.0;
  double revise_loss = 0.0;
  double validation_loss = 0.0;
  std::size_t candidates = 0;
};

struct RunReport {
  std::vector<Event> events;
  std::vector<double> fit_losses;  // per epoch
  std::vector<IterationRecord> iterations;
  double finetune_loss = 0.0;
  std::size_t epochs_run = 0;
  std::vector<logic::Rule> rules;

  bool operator==(const RunReport&) const;
};

struct RunData {
  const data::LabeledSet* learner = nullptr;
  const data::LabeledSet* critic = nullptr;
  const data::LabeledSet* validation = nullptr;  // defaults to the critic set
  const ConceptSchema* schema = nullptr;         // concept instantiation only
  // Called with "fit" after Fit and "final" at the end of the run.
  std::function<void(const std::string&, const nets::Model&)> checkpoint;
};

struct RunResult {
  nets::Model learner;
  RunReport report;
};

// Inputs as the model expects them: images stay [N,C,H,W]; concept matrices
// are flattened to [N, O*A].
Tensor model_inputs(const nets::Model& model, const Tensor& inputs);

// Plain cross-entropy epochs. Returns the mean loss of each epoch.
std::vector<double> fit(Learner& learner, const data::LabeledSet& set, std::size_t epochs, const LsxConfig& cfg);

// Mean cross-entropy without training.
double base_loss(const nets::Model& model, const data::LabeledSet& set);
double accuracy(const nets::Model& model, const data::LabeledSet& set);

Explanations explain(const nets::Model& learner, const data::LabeledSet& critic_set, const LsxConfig& cfg,
                     const ConceptSchema* schema = nullptr);

// Scales each row by 1 / max|row| as a constant factor.
ad::Var normalize_explanation(ad::Var e);

// Critic cross-entropy on explanations `e`; gradients reach whatever `e`
// depends on. The critic parameters enter as constants.
ad::Var critic_loss(const nets::Model& critic, ad::Var e, std::span<const int> labels, const LsxConfig& cfg);

// Trains a critic for cfg.critic_epochs on (explanations, labels). The critic
// starts fresh when cfg.critic_reinit is set or `previous` is null.
Feedback reflect_cnn(const Tensor& explanations, std::span<const int> labels, const nets::ModelSpec& critic_spec,
                     const LsxConfig& cfg, std::size_t iteration, const nets::Model* previous = nullptr);
Feedback reflect_nesy(const logic::CandidateSet& candidates, const data::LabeledSet& critic_set,
                      const ConceptSchema& schema, const LsxConfig& cfg);

// Joint-loss epochs over the learner set. Returns the mean joint loss.
double revise(Learner& learner, const data::LabeledSet& set, const Feedback& feedback, const LsxConfig& cfg,
              const ConceptSchema* schema = nullptr);

// Trains on CE + lambda_ft * MSE(explanations, E*), E* frozen at entry.
double finetune_lock(Learner& learner, const data::LabeledSet& set, const LsxConfig& cfg);

RunResult run_lsx(const LsxConfig& cfg, const nets::ModelSpec& learner_spec, const RunData& data);
// Fit only, for `epochs` epochs with the same seed streams as run_lsx.
RunResult run_vanilla(const LsxConfig& cfg, const nets::ModelSpec& learner_spec, const RunData& data,
                      std::size_t epochs);

// One line per event: "<iteration> <module>[ key=value...]".
std::string format_events(const std::vector<Event>& events);
std::vector<Event> parse_events(const std::string& text);
// True if the module sequence is fit, then per iteration explain reflect
// revise (optionally ending early with converged), then finetune_lock for
// the CNN instantiation.
bool events_follow_loop(const std::vector<Event>& events, Instantiation inst);

}  // namespace lsx::core
