// SPDX-License-Identifier: Apache-2.0
#include <Eigen/Dense>
#include <algorithm>

#include "lsx/evalmetrics.hpp"
#include "lsx/rng.hpp"

namespace lsx::eval {
namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const Mat> as_matrix(const Tensor& x) {
  if (x.rank() == 0 || x.dim(0) == 0) throw MetricError("ridge: empty input");
  const std::size_t n = x.dim(0), d = x.numel() / n;
  return {x.storage().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)};
}

}  // namespace

Tensor ridge_fit(const Tensor& x, std::span<const int> labels, std::size_t classes, double alpha) {
  if (!(alpha > 0.0)) throw MetricError("ridge: alpha must be positive");
  const auto X = as_matrix(x);
  if (static_cast<std::size_t>(X.rows()) != labels.size()) throw MetricError("ridge: label count mismatch");
  Mat Y = Mat::Zero(X.rows(), static_cast<Eigen::Index>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) throw MetricError("ridge: label out of range");
    Y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += alpha;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  // X^T X + alpha I is positive definite for alpha > 0.
  if (llt.info() != Eigen::Success) throw MetricError("ridge: system is not positive definite");
  Mat W = llt.solve(X.transpose() * Y);
  Tensor out(Shape{static_cast<std::size_t>(W.rows()), classes});
  std::copy(W.data(), W.data() + W.size(), out.storage().begin());
  return out;
}

std::vector<int> ridge_predict(const Tensor& x, const Tensor& weights) {
  const auto X = as_matrix(x);
  if (weights.rank() != 2 || static_cast<Eigen::Index>(weights.dim(0)) != X.cols()) {
    throw MetricError("ridge: weight shape does not match inputs");
  }
  Eigen::Map<const Mat> W(weights.storage().data(), static_cast<Eigen::Index>(weights.dim(0)),
                          static_cast<Eigen::Index>(weights.dim(1)));
  const Mat scores = X * W;
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    scores.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double ridge_separability(const Tensor& train_x, std::span<const int> train_y, const Tensor& test_x,
                          std::span<const int> test_y, std::size_t classes, double alpha) {
  const Tensor w = ridge_fit(train_x, train_y, classes, alpha);
  const auto pred = ridge_predict(test_x, w);
  if (pred.size() != test_y.size()) throw MetricError("ridge: test label count mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == test_y[i] ? 1 : 0;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(pred.size());
}

double ridge_holdout(const Tensor& x, std::span<const int> labels, std::size_t classes, double alpha,
                     std::uint64_t seed, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw MetricError("ridge: train fraction outside (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
  Rng rng = make_rng(seed, "ridge-split");
  std::vector<std::size_t> train, test;
  for (auto& rows : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto cut = static_cast<std::size_t>(train_fraction * static_cast<double>(rows.size()) + 0.5);
    train.insert(train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(cut));
    test.insert(test.end(), rows.begin() + static_cast<std::ptrdiff_t>(cut), rows.end());
  }
  if (train.empty() || test.empty()) throw MetricError("ridge: split leaves an empty side");
  auto labels_of = [&](const std::vector<std::size_t>& rows) {
    std::vector<int> y;
    for (std::size_t r : rows) y.push_back(labels[r]);
    return y;
  };
  return ridge_separability(x.take_rows(train), labels_of(train), x.take_rows(test), labels_of(test), classes, alpha);
}

}  // namespace lsx::eval
