#pragma once

// Differentiable primitives recorded on a Tape. Each op pairs a plain tensor
// kernel (used for the forward value and for replay) with its adjoint.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cltrack/nn/tape.hpp"
#include "cltrack/nn/tensor.hpp"

namespace cltrack::nn {

namespace kernel {

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("add: " + a.shape_string() + " vs " + b.shape_string());
  Tensor c = a;
  c += b;
  return c;
}

/// Adds a 1 x n (or length-n) bias to every row of an m x n matrix.
inline Tensor add_bias(const Tensor& x, const Tensor& b) {
  if (b.size() != x.cols()) throw ShapeError("add_bias: bias " + b.shape_string() + " vs " + x.shape_string());
  Tensor y = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) += b[j];
  return y;
}

inline Tensor scale(const Tensor& x, double s) {
  Tensor y = x;
  for (auto& v : y.data()) v *= s;
  return y;
}

inline Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data()) v = sigmoid(v);
  return y;
}

/// Row-wise softmax, stabilised by subtracting the row maximum.
inline Tensor softmax_rows(const Tensor& x) {
  Tensor y = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double m = x(i, 0);
    for (std::size_t j = 1; j < x.cols(); ++j) m = std::max(m, x(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) s += (y(i, j) = std::exp(x(i, j) - m));
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) /= s;
  }
  return y;
}

inline Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin >= end || end > x.rows()) throw ShapeError("slice_rows out of range");
  Tensor y = Tensor::matrix(end - begin, x.cols());
  std::copy(x.data().begin() + begin * x.cols(), x.data().begin() + end * x.cols(), y.data().begin());
  return y;
}

inline Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin >= end || end > x.cols()) throw ShapeError("slice_cols out of range");
  Tensor y = Tensor::matrix(x.rows(), end - begin);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) y(i, j - begin) = x(i, j);
  return y;
}

inline Tensor concat_cols(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const std::size_t rows = parts.front()->rows();
  std::size_t cols = 0;
  for (const auto* p : parts) {
    if (p->rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p->cols();
  }
  Tensor y = Tensor::matrix(rows, cols);
  std::size_t off = 0;
  for (const auto* p : parts) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < p->cols(); ++j) y(i, off + j) = (*p)(i, j);
    off += p->cols();
  }
  return y;
}

struct LayerNormStats {
  std::vector<double> mean;
  std::vector<double> inv_std;
};

inline LayerNormStats layer_norm_stats(const Tensor& x, double eps) {
  LayerNormStats s;
  const std::size_t n = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += x(i, j);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
    var /= static_cast<double>(n);
    s.mean.push_back(mu);
    s.inv_std.push_back(1.0 / std::sqrt(var + eps));
  }
  return s;
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset, double eps) {
  if (gain.size() != x.cols() || offset.size() != x.cols()) throw ShapeError("layer_norm: affine width mismatch");
  const auto s = layer_norm_stats(x, eps);
  Tensor y = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      y(i, j) = gain[j] * (x(i, j) - s.mean[i]) * s.inv_std[i] + offset[j];
  return y;
}

}  // namespace kernel

inline Var add(Tape& t, Var a, Var b) {
  return t.record([=](const Tape& tp) { return kernel::add(tp.value(a), tp.value(b)); }, {a, b},
                  [=](Tape& tp, std::size_t self) {
                    const Tensor g = tp.grad_of(self);
                    tp.grad_ref(a) += g;
                    tp.grad_ref(b) += g;
                  });
}

inline Var add_bias(Tape& t, Var x, Var b) {
  return t.record([=](const Tape& tp) { return kernel::add_bias(tp.value(x), tp.value(b)); }, {x, b},
                  [=](Tape& tp, std::size_t self) {
                    const Tensor g = tp.grad_of(self);
                    tp.grad_ref(x) += g;
                    Tensor& gb = tp.grad_ref(b);
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
                  });
}

inline Var matmul(Tape& t, Var a, Var b) {
  return t.record([=](const Tape& tp) { return matmul(tp.value(a), tp.value(b)); }, {a, b},
                  [=](Tape& tp, std::size_t self) {
                    const Tensor g = tp.grad_of(self);
                    tp.grad_ref(a) += matmul_nt(g, tp.value(b));
                    tp.grad_ref(b) += matmul_tn(tp.value(a), g);
                  });
}

/// a * b^T
inline Var matmul_nt(Tape& t, Var a, Var b) {
  return t.record([=](const Tape& tp) { return matmul_nt(tp.value(a), tp.value(b)); }, {a, b},
                  [=](Tape& tp, std::size_t self) {
                    const Tensor g = tp.grad_of(self);
                    tp.grad_ref(a) += matmul(g, tp.value(b));
                    tp.grad_ref(b) += matmul_tn(g, tp.value(a));
                  });
}

inline Var scale(Tape& t, Var x, double s) {
  return t.record([=](const Tape& tp) { return kernel::scale(tp.value(x), s); }, {x},
                  [=](Tape& tp, std::size_t self) { tp.grad_ref(x) += kernel::scale(tp.grad_of(self), s); });
}

inline Var relu(Tape& t, Var x) {
  return t.record([=](const Tape& tp) { return kernel::relu(tp.value(x)); }, {x},
                  [=](Tape& tp, std::size_t self) {
                    Tensor g = tp.grad_of(self);
                    const Tensor& in = tp.value(x);
                    for (std::size_t i = 0; i < g.size(); ++i)
                      if (!(in[i] > 0.0)) g[i] = 0.0;
                    tp.grad_ref(x) += g;
                  });
}

inline Var sigmoid(Tape& t, Var x) {
  return t.record([=](const Tape& tp) { return kernel::sigmoid(tp.value(x)); }, {x},
                  [=](Tape& tp, std::size_t self) {
                    Tensor g = tp.grad_of(self);
                    const Tensor y = kernel::sigmoid(tp.value(x));
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
                    tp.grad_ref(x) += g;
                  });
}

/// Elementwise y = x * mul + add, with per-column coefficients.
inline Var column_affine(Tape& t, Var x, std::vector<double> mul, std::vector<double> add) {
  auto fwd = [=](const Tape& tp) {
    Tensor y = tp.value(x);
    if (mul.size() != y.cols() || add.size() != y.cols()) throw ShapeError("column_affine width mismatch");
    for (std::size_t i = 0; i < y.rows(); ++i)
      for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) = y(i, j) * mul[j] + add[j];
    return y;
  };
  return t.record(fwd, {x}, [=](Tape& tp, std::size_t self) {
    Tensor g = tp.grad_of(self);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) *= mul[j];
    tp.grad_ref(x) += g;
  });
}

inline Var softmax_rows(Tape& t, Var x) {
  return t.record([=](const Tape& tp) { return kernel::softmax_rows(tp.value(x)); }, {x},
                  [=](Tape& tp, std::size_t self) {
                    const Tensor g = tp.grad_of(self);
                    const Tensor y = kernel::softmax_rows(tp.value(x));
                    Tensor gx = Tensor::matrix(g.rows(), g.cols());
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                      double s = 0.0;
                      for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j) * y(i, j);
                      for (std::size_t j = 0; j < g.cols(); ++j) gx(i, j) = y(i, j) * (g(i, j) - s);
                    }
                    tp.grad_ref(x) += gx;
                  });
}

inline Var slice_rows(Tape& t, Var x, std::size_t begin, std::size_t end) {
  return t.record([=](const Tape& tp) { return kernel::slice_rows(tp.value(x), begin, end); }, {x},
                  [=](Tape& tp, std::size_t self) {
                    const Tensor g = tp.grad_of(self);
                    Tensor& gx = tp.grad_ref(x);
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      for (std::size_t j = 0; j < g.cols(); ++j) gx(begin + i, j) += g(i, j);
                  });
}

inline Var slice_cols(Tape& t, Var x, std::size_t begin, std::size_t end) {
  return t.record([=](const Tape& tp) { return kernel::slice_cols(tp.value(x), begin, end); }, {x},
                  [=](Tape& tp, std::size_t self) {
                    const Tensor g = tp.grad_of(self);
                    Tensor& gx = tp.grad_ref(x);
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      for (std::size_t j = 0; j < g.cols(); ++j) gx(i, begin + j) += g(i, j);
                  });
}

inline Var concat_cols(Tape& t, std::vector<Var> parts) {
  auto fwd = [=](const Tape& tp) {
    std::vector<const Tensor*> ptrs;
    for (auto p : parts) ptrs.push_back(&tp.value(p));
    return kernel::concat_cols(ptrs);
  };
  return t.record(fwd, parts, [=](Tape& tp, std::size_t self) {
    const Tensor g = tp.grad_of(self);
    std::size_t off = 0;
    for (auto p : parts) {
      Tensor& gp = tp.grad_ref(p);
      for (std::size_t i = 0; i < gp.rows(); ++i)
        for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) += g(i, off + j);
      off += gp.cols();
    }
  });
}

inline constexpr double kLayerNormEps = 1e-5;

/// Normalises each row to zero mean and unit variance, then applies gain and offset.
inline Var layer_norm(Tape& t, Var x, Var gain, Var offset, double eps = kLayerNormEps) {
  auto fwd = [=](const Tape& tp) { return kernel::layer_norm(tp.value(x), tp.value(gain), tp.value(offset), eps); };
  return t.record(fwd, {x, gain, offset}, [=](Tape& tp, std::size_t self) {
    const Tensor g = tp.grad_of(self);
    const Tensor& in = tp.value(x);
    const Tensor& gn = tp.value(gain);
    const auto s = kernel::layer_norm_stats(in, eps);
    const std::size_t n = in.cols();
    Tensor gx = Tensor::matrix(in.rows(), n);
    Tensor& gg = tp.grad_ref(gain);
    Tensor& go = tp.grad_ref(offset);
    std::vector<double> xhat(n), dxhat(n);
    for (std::size_t i = 0; i < in.rows(); ++i) {
      double sum_d = 0.0, sum_dx = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        xhat[j] = (in(i, j) - s.mean[i]) * s.inv_std[i];
        dxhat[j] = g(i, j) * gn[j];
        gg[j] += g(i, j) * xhat[j];
        go[j] += g(i, j);
        sum_d += dxhat[j];
        sum_dx += dxhat[j] * xhat[j];
      }
      const double k = s.inv_std[i] / static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j)
        gx(i, j) = k * (static_cast<double>(n) * dxhat[j] - sum_d - xhat[j] * sum_dx);
    }
    tp.grad_ref(x) += gx;
  });
}

}  // namespace cltrack::nn
