// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <sstream>

#include "lsx/nets.hpp"

namespace lsx::nets {

void Optimizer::step(std::vector<Param>& params, std::span<const Tensor> grads) {
  if (grads.size() != params.size()) throw ShapeError("optimizer: gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape()) {
      throw ShapeError("optimizer: gradient shape mismatch for " + params[i].name);
    }
  }
  ++t_;
  if (cfg_.kind == OptimKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto w = params[i].value.data();
      auto g = grads[i].data();
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= cfg_.lr * g[j];
    }
    return;
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.shape());
      v_.emplace_back(p.value.shape());
    }
  }
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value.data();
    auto g = grads[i].data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      w[j] -= cfg_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
  }
}

double train_step(Model& model, Optimizer& opt, Graph& g, std::span<const Var> bound, Var loss) {
  const double value = loss.value().item();
  if (!std::isfinite(value)) {
    std::ostringstream os;
    os << "non-finite loss " << value << " at optimizer step " << opt.steps();
    throw NonFiniteError(os.str());
  }
  std::vector<Var> grads = g.backward(loss, bound);
  std::vector<Tensor> values;
  values.reserve(grads.size());
  for (const Var& v : grads) values.push_back(v.value());
  opt.step(model.params(), values);
  return value;
}

}  // namespace lsx::nets
