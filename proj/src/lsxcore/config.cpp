// SPDX-License-Identifier: Apache-2.0
#include "lsx/lsx.hpp"

namespace lsx::core {

void LsxConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations (T) must be at least 1");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(lambda_ft >= 0.0)) throw ConfigError("lambda_ft must be non-negative");
  if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in [0, 1]");
  if (batch_size == 0 || critic_batch_size == 0) throw ConfigError("batch sizes must be positive");
  if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be non-negative");
  if (ig_steps == 0) throw ConfigError("ig_steps must be positive");
  if (caps.max_objects == 0 || caps.max_attrs == 0) throw ConfigError("rule caps must be positive");
  if (!(learner_opt.lr >= 0.0) || !(critic_opt.lr >= 0.0)) throw ConfigError("learning rates must be non-negative");
}

std::size_t LsxConfig::total_epochs() const {
  return fit_epochs + iterations * revise_epochs + (instantiation == Instantiation::cnn ? finetune_epochs : 0);
}

Learner Learner::create(const nets::ModelSpec& spec, const LsxConfig& cfg) {
  return Learner{nets::Model::init(spec, derive_seed(cfg.seed, "learner")), nets::Optimizer(cfg.learner_opt),
                 make_rng(cfg.seed, "order")};
}

}  // namespace lsx::core
