// SPDX-License-Identifier: Apache-2.0
#include "lsx/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace lsx {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_str(shape_) + " does not match " + std::to_string(data_.size()) +
                     " values");
  }
}

Tensor Tensor::from(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(n * m);
  for (const auto& row : rows) {
    if (row.size() != m) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{n, m}, std::move(data));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (rank() == 0 || begin > end || end > shape_[0]) throw ShapeError("slice_rows out of range");
  const std::size_t stride = shape_[0] ? numel() / shape_[0] : 0;
  Shape s = shape_;
  s[0] = end - begin;
  return Tensor(std::move(s), std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                                                  data_.begin() + static_cast<std::ptrdiff_t>(end * stride)));
}

Tensor Tensor::take_rows(std::span<const std::size_t> rows) const {
  if (rank() == 0) throw ShapeError("take_rows on scalar");
  const std::size_t stride = shape_[0] ? numel() / shape_[0] : 0;
  Shape s = shape_;
  s[0] = rows.size();
  std::vector<double> out;
  out.reserve(rows.size() * stride);
  for (std::size_t r : rows) {
    if (r >= shape_[0]) throw ShapeError("take_rows index out of range");
    out.insert(out.end(), data_.begin() + static_cast<std::ptrdiff_t>(r * stride),
               data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * stride));
  }
  return Tensor(std::move(s), std::move(out));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor stack_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("stack_rows of nothing");
  Shape s{parts.size()};
  s.insert(s.end(), parts[0].shape().begin(), parts[0].shape().end());
  std::vector<double> out;
  out.reserve(shape_numel(s));
  for (const auto& p : parts) {
    if (p.shape() != parts[0].shape()) throw ShapeError("stack_rows shape mismatch");
    out.insert(out.end(), p.storage().begin(), p.storage().end());
  }
  return Tensor(std::move(s), std::move(out));
}

}  // namespace lsx
