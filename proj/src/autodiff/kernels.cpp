// SPDX-License-Identifier: Apache-2.0
#include "kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lsx::ad::detail {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

[[noreturn]] void fail(const std::string& msg) { throw ShapeError(msg); }

void expect_arity(const std::vector<const Tensor*>& in, std::size_t n) {
  if (in.size() != n) fail("expected " + std::to_string(n) + " inputs, got " + std::to_string(in.size()));
}

void expect_same(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) fail("operand shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void expect_rank(const Tensor& t, std::size_t r, const char* what) {
  if (t.rank() != r) {
    fail(std::string(what) + " must have rank " + std::to_string(r) + ", got " + shape_str(t.shape()));
  }
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  expect_same(a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i]);
  return out;
}

struct ConvDims {
  std::size_t n, c, h, w, f, kh, kw, ho, wo;
};

// cols[(c*kh + p)*kw + q][i*wo + j] = x[c][i+p][j+q]
void im2col(const double* x, const ConvDims& d, double* cols) {
  const std::size_t hw_out = d.ho * d.wo;
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t p = 0; p < d.kh; ++p) {
      for (std::size_t q = 0; q < d.kw; ++q) {
        double* row = cols + ((c * d.kh + p) * d.kw + q) * hw_out;
        for (std::size_t i = 0; i < d.ho; ++i) {
          const double* src = x + (c * d.h + i + p) * d.w + q;
          std::copy(src, src + d.wo, row + i * d.wo);
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvDims& d, double* x) {
  const std::size_t hw_out = d.ho * d.wo;
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t p = 0; p < d.kh; ++p) {
      for (std::size_t q = 0; q < d.kw; ++q) {
        const double* row = cols + ((c * d.kh + p) * d.kw + q) * hw_out;
        for (std::size_t i = 0; i < d.ho; ++i) {
          double* dst = x + (c * d.h + i + p) * d.w + q;
          const double* src = row + i * d.wo;
          for (std::size_t j = 0; j < d.wo; ++j) dst[j] += src[j];
        }
      }
    }
  }
}

Tensor conv2d_fwd(const Tensor& x, const Tensor& w) {
  expect_rank(x, 4, "conv2d input");
  expect_rank(w, 4, "conv2d kernel");
  if (x.dim(1) != w.dim(1)) fail("conv2d channel mismatch: input " + shape_str(x.shape()) + ", kernel " + shape_str(w.shape()));
  if (w.dim(2) > x.dim(2) || w.dim(3) > x.dim(3)) fail("conv2d kernel larger than input");
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), 0, 0};
  d.ho = d.h - d.kh + 1;
  d.wo = d.w - d.kw + 1;
  const std::size_t ckk = d.c * d.kh * d.kw, hw_out = d.ho * d.wo;
  Tensor y(Shape{d.n, d.f, d.ho, d.wo});
  std::vector<double> cols(ckk * hw_out);
  CMapMat wm(w.data().data(), static_cast<Eigen::Index>(d.f), static_cast<Eigen::Index>(ckk));
  for (std::size_t n = 0; n < d.n; ++n) {
    im2col(x.data().data() + n * d.c * d.h * d.w, d, cols.data());
    CMapMat cm(cols.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw_out));
    MapMat ym(y.data().data() + n * d.f * hw_out, static_cast<Eigen::Index>(d.f), static_cast<Eigen::Index>(hw_out));
    ym.noalias() = wm * cm;
  }
  return y;
}

Tensor conv2d_grad_input_fwd(const Tensor& g, const Tensor& w, std::size_t height, std::size_t width) {
  expect_rank(g, 4, "conv2d_grad_input gradient");
  expect_rank(w, 4, "conv2d_grad_input kernel");
  if (g.dim(1) != w.dim(0)) fail("conv2d_grad_input filter mismatch");
  ConvDims d{g.dim(0), w.dim(1), height, width, w.dim(0), w.dim(2), w.dim(3), g.dim(2), g.dim(3)};
  if (d.ho + d.kh - 1 != d.h || d.wo + d.kw - 1 != d.w) fail("conv2d_grad_input output size inconsistent");
  const std::size_t ckk = d.c * d.kh * d.kw, hw_out = d.ho * d.wo;
  Tensor x(Shape{d.n, d.c, d.h, d.w});
  std::vector<double> cols(ckk * hw_out);
  CMapMat wm(w.data().data(), static_cast<Eigen::Index>(d.f), static_cast<Eigen::Index>(ckk));
  for (std::size_t n = 0; n < d.n; ++n) {
    CMapMat gm(g.data().data() + n * d.f * hw_out, static_cast<Eigen::Index>(d.f), static_cast<Eigen::Index>(hw_out));
    MapMat cm(cols.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw_out));
    cm.noalias() = wm.transpose() * gm;
    col2im_add(cols.data(), d, x.data().data() + n * d.c * d.h * d.w);
  }
  return x;
}

Tensor conv2d_grad_weight_fwd(const Tensor& x, const Tensor& g, std::size_t kh, std::size_t kw) {
  expect_rank(x, 4, "conv2d_grad_weight input");
  expect_rank(g, 4, "conv2d_grad_weight gradient");
  if (x.dim(0) != g.dim(0)) fail("conv2d_grad_weight batch mismatch");
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), g.dim(1), kh, kw, g.dim(2), g.dim(3)};
  if (d.ho + d.kh - 1 != d.h || d.wo + d.kw - 1 != d.w) fail("conv2d_grad_weight kernel size inconsistent");
  const std::size_t ckk = d.c * d.kh * d.kw, hw_out = d.ho * d.wo;
  Tensor w(Shape{d.f, d.c, d.kh, d.kw});
  std::vector<double> cols(ckk * hw_out);
  MapMat wm(w.data().data(), static_cast<Eigen::Index>(d.f), static_cast<Eigen::Index>(ckk));
  for (std::size_t n = 0; n < d.n; ++n) {
    im2col(x.data().data() + n * d.c * d.h * d.w, d, cols.data());
    CMapMat cm(cols.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw_out));
    CMapMat gm(g.data().data() + n * d.f * hw_out, static_cast<Eigen::Index>(d.f), static_cast<Eigen::Index>(hw_out));
    wm.noalias() += gm * cm.transpose();
  }
  return w;
}

Tensor avgpool_fwd(const Tensor& x, std::size_t k) {
  if (x.rank() < 2 || k == 0) fail("avgpool2d needs rank >= 2 and k >= 1");
  const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  if (h % k || w % k) fail("avgpool2d window " + std::to_string(k) + " does not divide " + shape_str(x.shape()));
  const std::size_t planes = x.numel() / (h * w), ho = h / k, wo = w / k;
  Shape s = x.shape();
  s[s.size() - 2] = ho;
  s[s.size() - 1] = wo;
  Tensor y(s);
  const double inv = 1.0 / static_cast<double>(k * k);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.data().data() + p * h * w;
    double* dst = y.data().data() + p * ho * wo;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) dst[(i / k) * wo + j / k] += src[i * w + j];
    for (std::size_t i = 0; i < ho * wo; ++i) dst[i] *= inv;
  }
  return y;
}

Tensor avgpool_grad_fwd(const Tensor& g, std::size_t k) {
  if (g.rank() < 2 || k == 0) fail("avgpool2d_grad needs rank >= 2 and k >= 1");
  const std::size_t ho = g.dim(g.rank() - 2), wo = g.dim(g.rank() - 1);
  const std::size_t planes = g.numel() / (ho * wo), h = ho * k, w = wo * k;
  Shape s = g.shape();
  s[s.size() - 2] = h;
  s[s.size() - 1] = w;
  Tensor x(s);
  const double inv = 1.0 / static_cast<double>(k * k);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = g.data().data() + p * ho * wo;
    double* dst = x.data().data() + p * h * w;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) dst[i * w + j] = src[(i / k) * wo + j / k] * inv;
  }
  return x;
}

void rows_cols(const Tensor& x, std::size_t& rows, std::size_t& cols, const char* what) {
  if (x.rank() == 0) fail(std::string(what) + " needs rank >= 1");
  cols = x.dim(x.rank() - 1);
  if (cols == 0) fail(std::string(what) + " over empty axis");
  rows = x.numel() / cols;
}

Tensor softmax_fwd(const Tensor& x) {
  std::size_t rows, cols;
  rows_cols(x, rows, cols, "softmax");
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * cols;
    double* out = y.data().data() + r * cols;
    const double m = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (out[c] = std::exp(in[c] - m));
    for (std::size_t c = 0; c < cols; ++c) out[c] /= z;
  }
  return y;
}

void check_labels(const std::vector<std::size_t>& labels, std::size_t rows, std::size_t cols) {
  if (labels.size() != rows) {
    fail("label count " + std::to_string(labels.size()) + " does not match " + std::to_string(rows) + " rows");
  }
  for (std::size_t l : labels)
    if (l >= cols) fail("label " + std::to_string(l) + " out of range for " + std::to_string(cols) + " classes");
}

Tensor softmax_ce_fwd(const Tensor& logits, const std::vector<std::size_t>& labels) {
  expect_rank(logits, 2, "softmax_cross_entropy logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  check_labels(labels, n, k);
  if (n == 0) fail("softmax_cross_entropy on empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* in = logits.data().data() + r * k;
    const double m = *std::max_element(in, in + k);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(in[c] - m);
    total += (m + std::log(z)) - in[labels[r]];
  }
  return Tensor::scalar(total / static_cast<double>(n));
}

}  // namespace

Tensor compute(OpKind kind, const std::vector<const Tensor*>& in, const OpAttrs& attrs) {
  switch (kind) {
    case OpKind::leaf:
      fail("leaf nodes have no forward rule");
    case OpKind::add:
      expect_arity(in, 2);
      return zip(*in[0], *in[1], [](double a, double b) { return a + b; });
    case OpKind::sub:
      expect_arity(in, 2);
      return zip(*in[0], *in[1], [](double a, double b) { return a - b; });
    case OpKind::mul:
      expect_arity(in, 2);
      return zip(*in[0], *in[1], [](double a, double b) { return a * b; });
    case OpKind::scale: {
      expect_arity(in, 1);
      const double c = attrs.scalar;
      return map(*in[0], [c](double a) { return a * c; });
    }
    case OpKind::matmul: {
      expect_arity(in, 2);
      const Tensor &a = *in[0], &b = *in[1];
      expect_rank(a, 2, "matmul lhs");
      expect_rank(b, 2, "matmul rhs");
      if (a.dim(1) != b.dim(0)) fail("matmul inner dims differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
      Tensor c(Shape{a.dim(0), b.dim(1)});
      CMapMat am(a.data().data(), static_cast<Eigen::Index>(a.dim(0)), static_cast<Eigen::Index>(a.dim(1)));
      CMapMat bm(b.data().data(), static_cast<Eigen::Index>(b.dim(0)), static_cast<Eigen::Index>(b.dim(1)));
      MapMat cm(c.data().data(), static_cast<Eigen::Index>(a.dim(0)), static_cast<Eigen::Index>(b.dim(1)));
      cm.noalias() = am * bm;
      return c;
    }
    case OpKind::transpose: {
      expect_arity(in, 1);
      const Tensor& a = *in[0];
      expect_rank(a, 2, "transpose input");
      Tensor t(Shape{a.dim(1), a.dim(0)});
      for (std::size_t i = 0; i < a.dim(0); ++i)
        for (std::size_t j = 0; j < a.dim(1); ++j) t[j * a.dim(0) + i] = a[i * a.dim(1) + j];
      return t;
    }
    case OpKind::conv2d:
      expect_arity(in, 2);
      return conv2d_fwd(*in[0], *in[1]);
    case OpKind::conv2d_grad_input:
      expect_arity(in, 2);
      return conv2d_grad_input_fwd(*in[0], *in[1], attrs.dims.at(0), attrs.dims.at(1));
    case OpKind::conv2d_grad_weight:
      expect_arity(in, 2);
      return conv2d_grad_weight_fwd(*in[0], *in[1], attrs.dims.at(0), attrs.dims.at(1));
    case OpKind::relu:
      expect_arity(in, 1);
      return map(*in[0], [](double a) { return a > 0.0 ? a : 0.0; });
    case OpKind::sigmoid:
      expect_arity(in, 1);
      return map(*in[0], [](double a) {
        if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
        const double e = std::exp(a);
        return e / (1.0 + e);
      });
    case OpKind::avgpool2d:
      expect_arity(in, 1);
      return avgpool_fwd(*in[0], attrs.dims.at(0));
    case OpKind::avgpool2d_grad:
      expect_arity(in, 1);
      return avgpool_grad_fwd(*in[0], attrs.dims.at(0));
    case OpKind::reshape:
      expect_arity(in, 1);
      return in[0]->reshaped(attrs.shape);
    case OpKind::sum: {
      expect_arity(in, 1);
      const std::size_t outer = attrs.dims.at(0), mid = attrs.dims.at(1), inner = attrs.dims.at(2);
      if (outer * mid * inner != in[0]->numel()) fail("sum view " + std::to_string(outer) + "x" + std::to_string(mid) + "x" + std::to_string(inner) + " does not cover " + shape_str(in[0]->shape()));
      if (shape_numel(attrs.shape) != mid) fail("sum output shape does not hold the kept axis");
      Tensor out(attrs.shape);
      const double* x = in[0]->data().data();
      for (std::size_t a = 0; a < outer; ++a)
        for (std::size_t b = 0; b < mid; ++b) {
          double s = 0.0;
          const double* p = x + (a * mid + b) * inner;
          for (std::size_t c = 0; c < inner; ++c) s += p[c];
          out[b] += s;
        }
      return out;
    }
    case OpKind::broadcast: {
      expect_arity(in, 1);
      const std::size_t outer = attrs.dims.at(0), inner = attrs.dims.at(1), mid = in[0]->numel();
      if (outer * mid * inner != shape_numel(attrs.shape)) fail("broadcast of " + shape_str(in[0]->shape()) + " cannot fill " + shape_str(attrs.shape));
      Tensor out(attrs.shape);
      double* y = out.data().data();
      for (std::size_t a = 0; a < outer; ++a)
        for (std::size_t b = 0; b < mid; ++b) std::fill_n(y + (a * mid + b) * inner, inner, (*in[0])[b]);
      return out;
    }
    case OpKind::mean: {
      expect_arity(in, 1);
      if (in[0]->numel() == 0) fail("mean of empty tensor");
      double s = 0.0;
      for (double v : in[0]->data()) s += v;
      return Tensor::scalar(s / static_cast<double>(in[0]->numel()));
    }
    case OpKind::max_over_axis: {
      expect_arity(in, 1);
      std::size_t rows, cols;
      rows_cols(*in[0], rows, cols, "max_over_axis");
      Shape s(in[0]->shape().begin(), in[0]->shape().end() - 1);
      Tensor out(s);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* p = in[0]->data().data() + r * cols;
        out[r] = *std::max_element(p, p + cols);
      }
      return out;
    }
    case OpKind::softmax:
      expect_arity(in, 1);
      return softmax_fwd(*in[0]);
    case OpKind::softmax_cross_entropy:
      expect_arity(in, 1);
      return softmax_ce_fwd(*in[0], attrs.index);
    case OpKind::mse: {
      expect_arity(in, 2);
      expect_same(*in[0], *in[1]);
      if (in[0]->numel() == 0) fail("mse of empty tensors");
      double s = 0.0;
      for (std::size_t i = 0; i < in[0]->numel(); ++i) {
        const double d = (*in[0])[i] - (*in[1])[i];
        s += d * d;
      }
      return Tensor::scalar(s / static_cast<double>(in[0]->numel()));
    }
    case OpKind::gather_rows: {
      expect_arity(in, 1);
      expect_rank(*in[0], 2, "gather_rows input");
      const std::size_t n = in[0]->dim(0), k = in[0]->dim(1);
      check_labels(attrs.index, n, k);
      Tensor out(Shape{n});
      for (std::size_t r = 0; r < n; ++r) out[r] = (*in[0])[r * k + attrs.index[r]];
      return out;
    }
    case OpKind::scatter_rows: {
      expect_arity(in, 1);
      expect_rank(*in[0], 1, "scatter_rows input");
      const std::size_t n = in[0]->dim(0), k = attrs.dims.at(0);
      check_labels(attrs.index, n, k);
      Tensor out(Shape{n, k});
      for (std::size_t r = 0; r < n; ++r) out[r * k + attrs.index[r]] = (*in[0])[r];
      return out;
    }
  }
  fail("unknown op kind");
}

}  // namespace lsx::ad::detail
