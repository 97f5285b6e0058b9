// SPDX-License-Identifier: Apache-2.0
//
// Evaluation: accuracy, ridge separability and IIES of explanations, and
// comprehensiveness / sufficiency in discrete and continuous form.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lsx/nets.hpp"
#include "lsx/tensor.hpp"

namespace lsx::eval {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Solves (X^T X + alpha I) W = X^T Y with one-hot Y. x: [N, D]; returns [D, K].
Tensor ridge_fit(const Tensor& x, std::span<const int> labels, std::size_t classes, double alpha);
std::vector<int> ridge_predict(const Tensor& x, const Tensor& weights);

// Held-out accuracy in percent. Inputs are flattened to [N, D].
double ridge_separability(const Tensor& train_x, std::span<const int> train_y, const Tensor& test_x,
                          std::span<const int> test_y, std::size_t classes, double alpha = 1.0);

// Per-class 80/20 split of one explanation set, then ridge_separability.
double ridge_holdout(const Tensor& x, std::span<const int> labels, std::size_t classes, double alpha,
                     std::uint64_t seed, double train_fraction = 0.8);

enum class IiesDenominator {
  printed,    // (1/K) * sum over the K-1 other class means
  corrected,  // 1/(K-1) * the same sum
};

// Encodings z: [N, E]. Euclidean distances throughout.
double iies_encoded(const Tensor& z, std::span<const int> labels, IiesDenominator denom = IiesDenominator::printed);
// Encodes explanations with the penultimate features of `encoder` first.
double iies(const Tensor& explanations, std::span<const int> labels, const nets::Model& encoder,
            IiesDenominator denom = IiesDenominator::printed);

struct CompSuff {
  double comp = 0.0;
  double suff = 0.0;
};

// Entries of one sample treated as important: ceil(q * d / 100).
std::size_t top_count(double q, std::size_t d);

// Indices sorted by |value| desc, ties by index asc.
std::vector<std::size_t> rank_entries(std::span<const double> importance);

// Probability-based metrics. Masking writes zeros; c(x) is the prediction on
// the unmasked input.
CompSuff comp_suff_discrete(const nets::Model& model, const Tensor& inputs, const Tensor& explanations,
                            std::span<const double> b_set);

// Accuracy-based metrics in percentage points with median replacement and a
// random-selection baseline. Ties in |explanation| break in a random order
// drawn from the seed, so a constant map behaves like a random selection.
CompSuff comp_suff_continuous(const nets::Model& model, const Tensor& inputs, std::span<const int> labels,
                              const Tensor& explanations, std::span<const double> b_set, std::uint64_t seed);

// Median over every element of `inputs`.
double dataset_median(const Tensor& inputs);

std::vector<double> default_b_set();

enum class Variant { discrete, continuous };

struct MetricReport {
  std::string run;
  std::string mode;  // vanilla | lsx
  std::uint64_t seed = 0;
  double accuracy = 0.0;        // percent
  double ridge_accuracy = 0.0;  // percent
  double iies = 0.0;
  double comp = 0.0;
  double suff = 0.0;
  Variant variant = Variant::continuous;
  std::vector<double> b_set;

  void validate() const;
};

std::string csv_header();
std::string to_csv_row(const MetricReport& r);
MetricReport parse_csv_row(const std::string& line);

}  // namespace lsx::eval
