// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "lsx/attribution.hpp"
#include "lsx/lsx.hpp"

namespace lsx::core {
namespace {

using ad::Graph;
using ad::Var;

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + batch)));
  }
  return out;
}

std::vector<int> pick(std::span<const int> labels, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels[r]);
  return out;
}

std::string kv(const char* key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%.9g", key, v);
  return buf;
}

std::string kv(const char* key, std::size_t v) { return std::string(key) + "=" + std::to_string(v); }

void require_nonempty(const data::LabeledSet& set, const char* what) {
  if (set.size() == 0) throw std::invalid_argument(std::string("empty ") + what);
}

const ConceptSchema& need_schema(const ConceptSchema* schema) {
  if (!schema) throw ConfigError("concept instantiation needs a concept schema");
  return *schema;
}

// e = x * d(sum_i logits[i, y_i]) / dx, differentiable w.r.t. the parameters.
Var ixg_from_logits(Var logits, Var x, std::span<const int> labels) {
  Var target = ad::sum(ad::gather_rows(logits, labels));
  Var grad = x.graph().backward(target, std::span<const Var>(&x, 1), true)[0];
  return ad::mul(grad, x);
}

Tensor random_logits(std::size_t n, std::size_t k, Rng& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Tensor t(Shape{n, k});
  for (double& v : t.data()) v = d(rng);
  return t;
}

}  // namespace

Tensor model_inputs(const nets::Model& model, const Tensor& inputs) {
  if (inputs.rank() == 0) throw ShapeError("model_inputs on a scalar");
  Shape s{inputs.dim(0)};
  const Shape sample = model.sample_shape();
  s.insert(s.end(), sample.begin(), sample.end());
  return inputs.reshaped(s);
}

std::vector<double> fit(Learner& learner, const data::LabeledSet& set, std::size_t epochs, const LsxConfig& cfg) {
  std::vector<double> losses;
  if (epochs == 0) return losses;
  require_nonempty(set, "learner set");
  const Tensor inputs = model_inputs(learner.model, set.inputs);
  for (std::size_t e = 0; e < epochs; ++e) {
    double total = 0.0;
    std::size_t seen = 0;
    for (const auto& rows : epoch_batches(set.size(), cfg.batch_size, learner.order)) {
      Graph g;
      auto p = learner.model.bind(g, true);
      Var x = g.leaf(inputs.take_rows(rows));
      const std::vector<int> y = pick(set.labels, rows);
      Var loss = ad::softmax_cross_entropy(learner.model.logits(p, x), y);
      total += nets::train_step(learner.model, learner.opt, g, p, loss) * static_cast<double>(rows.size());
      seen += rows.size();
    }
    losses.push_back(total / static_cast<double>(seen));
  }
  return losses;
}

double base_loss(const nets::Model& model, const data::LabeledSet& set) {
  require_nonempty(set, "evaluation set");
  const Tensor logits = nets::predict(model, model_inputs(model, set.inputs));
  Graph g;
  ad::NoGradGuard guard(g);
  return ad::softmax_cross_entropy(g.leaf(logits), set.labels).value().item();
}

double accuracy(const nets::Model& model, const data::LabeledSet& set) {
  require_nonempty(set, "evaluation set");
  const auto pred = nets::argmax_rows(nets::predict(model, model_inputs(model, set.inputs)));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == set.labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

Explanations explain(const nets::Model& learner, const data::LabeledSet& critic_set, const LsxConfig& cfg,
                     const ConceptSchema* schema) {
  if (critic_set.size() == 0) throw std::invalid_argument("empty critic set");
  const Tensor inputs = model_inputs(learner, critic_set.inputs);
  if (cfg.instantiation == Instantiation::cnn) {
    return attr::input_x_gradient(learner, inputs, critic_set.labels);
  }
  const ConceptSchema& s = need_schema(schema);
  const Tensor ig = attr::integrated_gradients(learner, inputs, critic_set.labels, cfg.ig_steps);
  const Tensor mask = attr::binarize(ig, cfg.delta);
  const std::size_t width = mask.numel() / critic_set.size();
  logic::CandidateSet out;
  out.caps = cfg.caps;
  out.by_class.resize(critic_set.num_classes);
  for (std::size_t i = 0; i < critic_set.size(); ++i) {
    Tensor m(Shape{s.slots, s.width()},
             std::vector<double>(mask.storage().begin() + static_cast<std::ptrdiff_t>(i * width),
                                 mask.storage().begin() + static_cast<std::ptrdiff_t>((i + 1) * width)));
    logic::merge_candidates(out, logic::propositionalize(m, critic_set.labels[i], s, cfg.caps));
  }
  return out;
}

Var normalize_explanation(Var e) {
  const Tensor& v = e.value();
  const Shape shape = v.shape();
  if (shape.empty()) throw ShapeError("normalize_explanation on a scalar");
  const std::size_t n = shape[0], w = n ? v.numel() / n : 0;
  Tensor scales(Shape{n}, 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    double m = 0.0;
    for (std::size_t j = 0; j < w; ++j) m = std::max(m, std::abs(v[r * w + j]));
    if (m > 0.0) scales[r] = 1.0 / m;
  }
  Graph& g = e.graph();
  Var sv = g.constant(std::move(scales));
  return ad::mul(e, ad::broadcast(sv, shape, 1, w));
}

Var critic_loss(const nets::Model& critic, Var e, std::span<const int> labels, const LsxConfig& cfg) {
  auto cp = critic.bind(e.graph(), false);
  Var in = cfg.critic_normalize ? normalize_explanation(e) : e;
  return ad::softmax_cross_entropy(critic.logits(cp, in), labels);
}

Feedback reflect_cnn(const Tensor& explanations, std::span<const int> labels, const nets::ModelSpec& critic_spec,
                     const LsxConfig& cfg, std::size_t iteration, const nets::Model* previous) {
  const std::size_t n = labels.size();
  if (n == 0) throw std::invalid_argument("empty critic set");
  if (explanations.rank() == 0 || explanations.dim(0) != n) throw ShapeError("reflect: explanation count mismatch");
  CnnFeedback fb;
  Rng rng = make_rng(derive_seed(cfg.seed, "critic-order"), std::to_string(iteration));
  if (cfg.random_critic) {
    const std::size_t k = std::visit([](const auto& s) { return s.classes; }, critic_spec);
    Graph g;
    ad::NoGradGuard guard(g);
    Tensor logits = random_logits(n, k, rng);
    fb.critic_loss = ad::softmax_cross_entropy(g.leaf(logits), labels).value().item();
    const auto pred = nets::argmax_rows(logits);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < n; ++i) hit += pred[i] == labels[i] ? 1 : 0;
    fb.critic_accuracy = static_cast<double>(hit) / static_cast<double>(n);
    fb.random = true;
    return fb;
  }
  fb.critic = (cfg.critic_reinit || !previous) ? nets::Model::init(critic_spec, derive_seed(cfg.seed, "critic"))
                                               : *previous;
  nets::Optimizer opt(cfg.critic_opt);
  const Tensor inputs = model_inputs(fb.critic, explanations);
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t e = 0; e < cfg.critic_epochs; ++e) {
    for (const auto& rows : epoch_batches(n, cfg.critic_batch_size, rng)) {
      Graph g;
      auto cp = fb.critic.bind(g, true);
      Var x = g.leaf(inputs.take_rows(rows));
      if (cfg.critic_normalize) x = normalize_explanation(x);
      const std::vector<int> y = pick(labels, rows);
      Var loss = ad::softmax_cross_entropy(fb.critic.logits(cp, x), y);
      total += nets::train_step(fb.critic, opt, g, cp, loss);
      ++batches;
    }
  }
  fb.critic_loss = batches ? total / static_cast<double>(batches) : 0.0;
  Tensor shown = inputs;
  if (cfg.critic_normalize) shown = attr::normalize_rows(inputs);
  const auto pred = nets::argmax_rows(nets::predict(fb.critic, shown));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < n; ++i) hit += pred[i] == labels[i] ? 1 : 0;
  fb.critic_accuracy = static_cast<double>(hit) / static_cast<double>(n);
  return fb;
}

Feedback reflect_nesy(const logic::CandidateSet& candidates, const data::LabeledSet& critic_set,
                      const ConceptSchema& schema, const LsxConfig& cfg) {
  RuleFeedback fb;
  if (cfg.random_critic) {
    Rng rng = make_rng(cfg.seed, "random-rho");
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    fb.scores.resize(candidates.by_class.size());
    for (std::size_t k = 0; k < candidates.by_class.size(); ++k) {
      for (const auto& r : candidates.by_class[k]) fb.scores[k].push_back({r, 0.0, 0.0, u(rng)});
    }
  } else {
    fb.scores = logic::score_candidates(candidates, critic_set, schema, cfg.aggregation);
  }
  fb.rules = logic::select_best(fb.scores);
  return fb;
}

double revise(Learner& learner, const data::LabeledSet& set, const Feedback& feedback, const LsxConfig& cfg,
              const ConceptSchema* schema) {
  require_nonempty(set, "learner set");
  const bool cnn = cfg.instantiation == Instantiation::cnn;
  if (cnn != std::holds_alternative<CnnFeedback>(feedback)) throw ConfigError("feedback kind does not match the instantiation");
  if (cfg.lambda == 0.0) {
    const auto l = fit(learner, set, cfg.revise_epochs, cfg);
    return l.empty() ? 0.0 : std::accumulate(l.begin(), l.end(), 0.0) / static_cast<double>(l.size());
  }
  const Tensor inputs = model_inputs(learner.model, set.inputs);
  Rng critic_rng = make_rng(cfg.seed, "random-critic-logits");
  const std::size_t k = learner.model.num_classes();
  double total = 0.0;
  std::size_t seen = 0;
  for (std::size_t e = 0; e < cfg.revise_epochs; ++e) {
    for (const auto& rows : epoch_batches(set.size(), cfg.batch_size, learner.order)) {
      Graph g;
      auto p = learner.model.bind(g, true);
      const std::vector<int> y = pick(set.labels, rows);
      Var loss;
      if (cnn) {
        const auto& fb = std::get<CnnFeedback>(feedback);
        Var x = g.leaf(inputs.take_rows(rows), true);
        Var logits = learner.model.logits(p, x);
        Var base = ad::softmax_cross_entropy(logits, y);
        Var expl;
        if (fb.random) {
          expl = ad::softmax_cross_entropy(g.constant(random_logits(rows.size(), k, critic_rng)), y);
        } else {
          expl = critic_loss(fb.critic, ixg_from_logits(logits, x, y), y, cfg);
        }
        loss = ad::add(base, ad::scale(expl, cfg.lambda));
      } else {
        const ConceptSchema& s = need_schema(schema);
        const auto& fb = std::get<RuleFeedback>(feedback);
        const Tensor zb = inputs.take_rows(rows);
        Var z = g.leaf(zb);
        Var base = ad::softmax_cross_entropy(learner.model.logits(p, z), y);
        Var ig = attr::integrated_gradients(learner.model, p, z, y, cfg.ig_steps, true);
        const std::size_t d = zb.dim(1);
        Tensor target(Shape{rows.size(), d});
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const Tensor m = logic::ground_rule(fb.rules.at(static_cast<std::size_t>(y[i])),
                                              std::span<const double>(zb.data().data() + i * d, d), s);
          std::copy(m.storage().begin(), m.storage().end(), target.storage().begin() + static_cast<std::ptrdiff_t>(i * d));
        }
        Var expl = ad::mse(normalize_explanation(ig), g.constant(std::move(target)));
        loss = ad::add(base, ad::scale(expl, cfg.lambda));
      }
      total += nets::train_step(learner.model, learner.opt, g, p, loss) * static_cast<double>(rows.size());
      seen += rows.size();
    }
  }
  return seen ? total / static_cast<double>(seen) : 0.0;
}

double finetune_lock(Learner& learner, const data::LabeledSet& set, const LsxConfig& cfg) {
  if (cfg.instantiation != Instantiation::cnn) throw ConfigError("finetune_lock applies to the CNN instantiation");
  require_nonempty(set, "learner set");
  if (cfg.lambda_ft == 0.0) {
    const auto l = fit(learner, set, cfg.finetune_epochs, cfg);
    return l.empty() ? 0.0 : std::accumulate(l.begin(), l.end(), 0.0) / static_cast<double>(l.size());
  }
  const Tensor inputs = model_inputs(learner.model, set.inputs);
  const Tensor frozen = attr::input_x_gradient(learner.model, inputs, set.labels);
  double total = 0.0;
  std::size_t seen = 0;
  for (std::size_t e = 0; e < cfg.finetune_epochs; ++e) {
    for (const auto& rows : epoch_batches(set.size(), cfg.batch_size, learner.order)) {
      Graph g;
      auto p = learner.model.bind(g, true);
      const std::vector<int> y = pick(set.labels, rows);
      Var x = g.leaf(inputs.take_rows(rows), true);
      Var logits = learner.model.logits(p, x);
      Var base = ad::softmax_cross_entropy(logits, y);
      Var lock = ad::mse(ixg_from_logits(logits, x, y), g.constant(frozen.take_rows(rows)));
      Var loss = ad::add(base, ad::scale(lock, cfg.lambda_ft));
      total += nets::train_step(learner.model, learner.opt, g, p, loss) * static_cast<double>(rows.size());
      seen += rows.size();
    }
  }
  return seen ? total / static_cast<double>(seen) : 0.0;
}

bool RunReport::operator==(const RunReport& o) const {
  auto same_iter = [](const IterationRecord& a, const IterationRecord& b) {
    return a.iteration == b.iteration && a.critic_loss == b.critic_loss && a.critic_accuracy == b.critic_accuracy &&
           a.revise_loss == b.revise_loss && a.validation_loss == b.validation_loss && a.candidates == b.candidates;
  };
  if (iterations.size() != o.iterations.size()) return false;
  for (std::size_t i = 0; i < iterations.size(); ++i)
    if (!same_iter(iterations[i], o.iterations[i])) return false;
  return format_events(events) == format_events(o.events) && fit_losses == o.fit_losses &&
         finetune_loss == o.finetune_loss && epochs_run == o.epochs_run && rules == o.rules;
}

RunResult run_lsx(const LsxConfig& cfg, const nets::ModelSpec& learner_spec, const RunData& data) {
  cfg.validate();
  if (!data.learner || !data.critic) throw ConfigError("run needs learner and critic sets");
  const bool cnn = cfg.instantiation == Instantiation::cnn;
  if (!cnn) need_schema(data.schema);
  const data::LabeledSet& val = data.validation ? *data.validation : *data.critic;

  Learner learner = Learner::create(learner_spec, cfg);
  RunReport rep;
  rep.fit_losses = fit(learner, *data.learner, cfg.fit_epochs, cfg);
  rep.epochs_run = cfg.fit_epochs;
  rep.events.push_back({0, "fit", kv("epochs", cfg.fit_epochs)});
  if (data.checkpoint) data.checkpoint("fit", learner.model);

  double previous = base_loss(learner.model, val);
  std::optional<nets::Model> critic;
  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    IterationRecord rec;
    rec.iteration = t;
    try {
      Explanations ex = explain(learner.model, *data.critic, cfg, data.schema);
      Feedback fb;
      if (cnn) {
        rep.events.push_back({t, "explain", kv("maps", data.critic->size())});
        fb = reflect_cnn(std::get<Tensor>(ex), data.critic->labels, learner_spec, cfg, t, critic ? &*critic : nullptr);
        const auto& c = std::get<CnnFeedback>(fb);
        if (!c.random) critic = c.critic;
        rec.critic_loss = c.critic_loss;
        rec.critic_accuracy = c.critic_accuracy;
        rep.events.push_back({t, "reflect", kv("critic_loss", c.critic_loss) + " " + kv("critic_acc", c.critic_accuracy)});
      } else {
        const auto& cs = std::get<logic::CandidateSet>(ex);
        for (const auto& l : cs.by_class) rec.candidates += l.size();
        rep.events.push_back({t, "explain", kv("candidates", rec.candidates)});
        fb = reflect_nesy(cs, *data.critic, *data.schema, cfg);
        rep.rules = std::get<RuleFeedback>(fb).rules;
        std::string detail;
        for (std::size_t k = 0; k < rep.rules.size(); ++k) {
          if (k) detail += ' ';
          detail += kv(("rho" + std::to_string(k)).c_str(), [&] {
            for (const auto& s : std::get<RuleFeedback>(fb).scores[k])
              if (s.rule == rep.rules[k]) return s.rho;
            return 0.0;
          }());
        }
        rep.events.push_back({t, "reflect", detail});
      }
      rec.revise_loss = revise(learner, *data.learner, fb, cfg, data.schema);
      rep.epochs_run += cfg.revise_epochs;
      rec.validation_loss = base_loss(learner.model, val);
      rep.events.push_back({t, "revise", kv("loss", rec.revise_loss) + " " + kv("val_loss", rec.validation_loss)});
    } catch (const std::exception& e) {
      throw std::runtime_error("LSX iteration " + std::to_string(t) + ": " + e.what());
    }
    rep.iterations.push_back(rec);
    if (cfg.tolerance > 0.0 && std::abs(rec.validation_loss - previous) < cfg.tolerance) {
      rep.events.push_back({t, "converged", kv("delta", std::abs(rec.validation_loss - previous))});
      break;
    }
    previous = rec.validation_loss;
  }
  if (cnn) {
    rep.finetune_loss = finetune_lock(learner, *data.learner, cfg);
    rep.epochs_run += cfg.finetune_epochs;
    rep.events.push_back({cfg.iterations, "finetune_lock", kv("loss", rep.finetune_loss)});
  }
  if (data.checkpoint) data.checkpoint("final", learner.model);
  return {std::move(learner.model), std::move(rep)};
}

RunResult run_vanilla(const LsxConfig& cfg, const nets::ModelSpec& learner_spec, const RunData& data,
                      std::size_t epochs) {
  cfg.validate();
  if (!data.learner) throw ConfigError("run needs a learner set");
  Learner learner = Learner::create(learner_spec, cfg);
  RunReport rep;
  rep.fit_losses = fit(learner, *data.learner, epochs, cfg);
  rep.epochs_run = epochs;
  rep.events.push_back({0, "fit", kv("epochs", epochs)});
  if (data.checkpoint) {
    data.checkpoint("fit", learner.model);
    data.checkpoint("final", learner.model);
  }
  return {std::move(learner.model), std::move(rep)};
}

}  // namespace lsx::core
