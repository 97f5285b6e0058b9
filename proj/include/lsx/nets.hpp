// SPDX-License-Identifier: Apache-2.0
//
// Learner, critic and concept-predictor networks, optimizers and checkpoints.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lsx/autodiff.hpp"

namespace lsx::nets {

using ad::Graph;
using ad::Var;

struct Param {
  std::string name;
  Tensor value;
};

// conv(5x5) -> relu -> avgpool -> conv(5x5) -> relu -> fc -> relu -> fc
struct CnnSpec {
  std::size_t channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;
  std::size_t classes = 10;
  std::size_t conv1 = 8;
  std::size_t conv2 = 16;
  std::size_t kernel = 5;
  std::size_t fc1 = 128;
  std::size_t pool = 2;
};

// Flattened concept matrix -> hidden (relu) -> classes. hidden == 0 is linear.
struct MlpSpec {
  std::size_t inputs = 0;
  std::size_t hidden = 64;
  std::size_t classes = 0;
};

using ModelSpec = std::variant<CnnSpec, MlpSpec>;

class Model {
 public:
  Model() = default;

  // Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Model init(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::size_t num_classes() const;
  // Shape of a single input sample, without the batch axis.
  Shape sample_shape() const;
  std::size_t num_weights() const;

  // One leaf per parameter, in params() order.
  std::vector<Var> bind(Graph& g, bool trainable) const;
  // [N, ...sample_shape] -> [N, K]
  Var logits(std::span<const Var> p, Var x) const;
  // Penultimate activations, [N, width].
  Var features(std::span<const Var> p, Var x) const;

  // Replaces parameter values; names and shapes must match.
  void assign(const std::vector<Param>& values);

 private:
  Var trunk(std::span<const Var> p, Var x) const;

  ModelSpec spec_;
  std::vector<Param> params_;
};

// Forward without gradient recording, in chunks.
Tensor predict(const Model& model, const Tensor& batch);
Tensor embed(const Model& model, const Tensor& batch);
std::vector<int> argmax_rows(const Tensor& logits);

enum class OptimKind { sgd, adam };

struct OptimConfig {
  OptimKind kind = OptimKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Optimizer {
 public:
  explicit Optimizer(OptimConfig cfg = {}) : cfg_(cfg) {}

  void step(std::vector<Param>& params, std::span<const Tensor> grads);
  std::size_t steps() const { return t_; }
  const OptimConfig& config() const { return cfg_; }

 private:
  OptimConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

// Backpropagates `loss` into the bound parameter leaves and applies one
// optimizer step. Returns the loss before the step.
double train_step(Model& model, Optimizer& opt, Graph& g, std::span<const Var> bound, Var loss);

void save_checkpoint(const std::filesystem::path& path, std::span<const Param> params);
std::vector<Param> load_checkpoint(const std::filesystem::path& path);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lsx::nets
