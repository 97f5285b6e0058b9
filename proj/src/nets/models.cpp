// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "lsx/nets.hpp"
#include "lsx/rng.hpp"

namespace lsx::nets {
namespace {

constexpr std::size_t kChunk = 256;

Tensor uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

void check_spec(const CnnSpec& s) {
  if (!s.channels || !s.classes || !s.conv1 || !s.conv2 || !s.kernel || !s.fc1 || !s.pool) {
    throw ShapeError("cnn spec has a zero dimension");
  }
  if (s.height < s.kernel || s.width < s.kernel) throw ShapeError("cnn input smaller than kernel");
  const std::size_t h1 = s.height - s.kernel + 1, w1 = s.width - s.kernel + 1;
  if (h1 % s.pool || w1 % s.pool) throw ShapeError("cnn pool window does not divide conv1 output");
  if (h1 / s.pool < s.kernel || w1 / s.pool < s.kernel) throw ShapeError("cnn input too small for conv2");
}

std::size_t flat_width(const CnnSpec& s) {
  const std::size_t h = (s.height - s.kernel + 1) / s.pool - s.kernel + 1;
  const std::size_t w = (s.width - s.kernel + 1) / s.pool - s.kernel + 1;
  return s.conv2 * h * w;
}

Var add_bias_channels(Var y, Var b) {
  const Shape s = y.shape();
  return y + ad::broadcast(b, s, s[0], s[2] * s[3]);
}

Var linear(Var x, Var w, Var b) {
  Var y = ad::matmul(x, w);
  const Shape s = y.shape();
  return y + ad::broadcast(b, s, s[0], 1);
}

}  // namespace

Model Model::init(const ModelSpec& spec, std::uint64_t seed) {
  Model m;
  m.spec_ = spec;
  Rng rng = make_rng(seed, "init");
  auto layer = [&](const std::string& name, Shape wshape, std::size_t fan_in, std::size_t out) {
    m.params_.push_back({name + ".weight", uniform(std::move(wshape), fan_in, rng)});
    m.params_.push_back({name + ".bias", uniform(Shape{out}, fan_in, rng)});
  };
  if (const auto* c = std::get_if<CnnSpec>(&spec)) {
    check_spec(*c);
    layer("conv1", {c->conv1, c->channels, c->kernel, c->kernel}, c->channels * c->kernel * c->kernel, c->conv1);
    layer("conv2", {c->conv2, c->conv1, c->kernel, c->kernel}, c->conv1 * c->kernel * c->kernel, c->conv2);
    layer("fc1", {flat_width(*c), c->fc1}, flat_width(*c), c->fc1);
    layer("fc2", {c->fc1, c->classes}, c->fc1, c->classes);
  } else {
    const auto& p = std::get<MlpSpec>(spec);
    if (!p.inputs || !p.classes) throw ShapeError("mlp spec has a zero dimension");
    if (p.hidden) {
      layer("fc1", {p.inputs, p.hidden}, p.inputs, p.hidden);
      layer("fc2", {p.hidden, p.classes}, p.hidden, p.classes);
    } else {
      layer("fc", {p.inputs, p.classes}, p.inputs, p.classes);
    }
  }
  return m;
}

std::size_t Model::num_classes() const {
  return std::visit([](const auto& s) { return s.classes; }, spec_);
}

Shape Model::sample_shape() const {
  if (const auto* c = std::get_if<CnnSpec>(&spec_)) return {c->channels, c->height, c->width};
  return {std::get<MlpSpec>(spec_).inputs};
}

std::size_t Model::num_weights() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

std::vector<Var> Model::bind(Graph& g, bool trainable) const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(g.leaf(p.value, trainable));
  return out;
}

Var Model::trunk(std::span<const Var> p, Var x) const {
  if (p.size() != params_.size()) throw ShapeError("bound parameter count mismatch");
  Shape want = sample_shape();
  const Shape got = x.shape();
  if (got.size() != want.size() + 1 || !std::equal(want.begin(), want.end(), got.begin() + 1)) {
    throw ShapeError("model input " + shape_str(got) + " does not match sample shape " + shape_str(want));
  }
  if (const auto* c = std::get_if<CnnSpec>(&spec_)) {
    Var h = ad::relu(add_bias_channels(ad::conv2d(x, p[0]), p[1]));
    h = ad::avgpool2d(h, c->pool);
    h = ad::relu(add_bias_channels(ad::conv2d(h, p[2]), p[3]));
    h = ad::reshape(h, Shape{got[0], flat_width(*c)});
    return ad::relu(linear(h, p[4], p[5]));
  }
  if (std::get<MlpSpec>(spec_).hidden) return ad::relu(linear(x, p[0], p[1]));
  return x;
}

Var Model::features(std::span<const Var> p, Var x) const { return trunk(p, x); }

Var Model::logits(std::span<const Var> p, Var x) const {
  Var h = trunk(p, x);
  const std::size_t n = p.size();
  return linear(h, p[n - 2], p[n - 1]);
}

void Model::assign(const std::vector<Param>& values) {
  if (values.size() != params_.size()) throw ShapeError("parameter count mismatch on assign");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].name != params_[i].name || values[i].value.shape() != params_[i].value.shape()) {
      throw ShapeError("parameter " + values[i].name + " " + shape_str(values[i].value.shape()) +
                       " does not match " + params_[i].name + " " + shape_str(params_[i].value.shape()));
    }
  }
  for (std::size_t i = 0; i < values.size(); ++i) params_[i].value = values[i].value;
}

namespace {

template <class F>
Tensor chunked(const Model& model, const Tensor& batch, F f) {
  if (batch.rank() == 0) throw ShapeError("predict on a scalar");
  const std::size_t n = batch.dim(0);
  std::vector<double> out;
  std::size_t width = 0;
  for (std::size_t s = 0; s < n; s += kChunk) {
    Graph g;
    ad::NoGradGuard guard(g);
    auto p = model.bind(g, false);
    Var x = g.leaf(batch.slice_rows(s, std::min(n, s + kChunk)));
    const Tensor& y = f(p, x).value();
    width = y.dim(1);
    out.insert(out.end(), y.storage().begin(), y.storage().end());
  }
  if (n == 0) width = 0;
  return Tensor(Shape{n, width}, std::move(out));
}

}  // namespace

Tensor predict(const Model& model, const Tensor& batch) {
  return chunked(model, batch, [&](auto& p, Var x) { return model.logits(p, x); });
}

Tensor embed(const Model& model, const Tensor& batch) {
  return chunked(model, batch, [&](auto& p, Var x) { return model.features(p, x); });
}

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("argmax_rows needs rank 2");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = logits.data().data() + r * k;
    out[r] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return out;
}

}  // namespace lsx::nets
