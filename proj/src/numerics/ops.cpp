#include "flowvc/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace flowvc::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

using detail::make_result;
using detail::Node;

// Gradient sink for a parent, or nullptr when the parent is frozen.
double* sink(Node& out, std::size_t i) {
  auto& p = *out.parents[i];
  return p.requires_grad ? p.grad_buffer().data() : nullptr;
}

const std::vector<double>& value_of(Node& out, std::size_t i) { return out.parents[i]->value; }

void require(bool cond, const std::string& msg) {
  if (!cond) throw TensorError(msg);
}

void require_matrix(const Tensor& t, const char* op) {
  require(t.ndim() == 2, std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(),
          std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df) {
  const auto xs = x.data();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
  return make_result(x.shape(), std::move(out), {x}, [df](Node& self) {
    double* gx = sink(self, 0);
    if (!gx) return;
    const auto& xv = value_of(self, 0);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += self.grad[i] * df(xv[i], self.value[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  require(b.rows() == k, "matmul: inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n);
  MatMap(out.data(), m, n).noalias() = ConstMatMap(a.data().data(), m, k) * ConstMatMap(b.data().data(), k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    ConstMatMap g(self.grad.data(), m, n);
    if (double* ga = sink(self, 0)) {
      MatMap(ga, m, k).noalias() += g * ConstMatMap(value_of(self, 1).data(), k, n).transpose();
    }
    if (double* gb = sink(self, 1)) {
      MatMap(gb, k, n).noalias() += ConstMatMap(value_of(self, 0).data(), m, k).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  MatMap(out.data(), c, r) = ConstMatMap(a.data().data(), r, c).transpose();
  return make_result({c, r}, std::move(out), {a}, [r, c](Node& self) {
    if (double* ga = sink(self, 0)) MatMap(ga, r, c) += ConstMatMap(self.grad.data(), c, r).transpose();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = sink(self, p)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (double* g = sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = sink(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    if (double* g = sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (double* g = sink(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor add_per_row(const Tensor& x, const Tensor& v) {
  require_matrix(x, "add_per_row");
  const std::size_t r = x.rows(), c = x.cols();
  require(v.numel() == r, "add_per_row: vector length " + std::to_string(v.numel()) + " != rows " + std::to_string(r));
  const auto xv = x.data(), vv = v.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] + vv[i];
  return make_result(x.shape(), std::move(out), {x, v}, [r, c](Node& self) {
    if (double* gx = sink(self, 0)) {
      for (std::size_t i = 0; i < r * c; ++i) gx[i] += self.grad[i];
    }
    if (double* gv = sink(self, 1)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gv[i] += self.grad[i * c + j];
    }
  });
}

Tensor mul_per_row(const Tensor& x, const Tensor& v) {
  require_matrix(x, "mul_per_row");
  const std::size_t r = x.rows(), c = x.cols();
  require(v.numel() == r, "mul_per_row: vector length " + std::to_string(v.numel()) + " != rows " + std::to_string(r));
  const auto xv = x.data(), vv = v.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] * vv[i];
  return make_result(x.shape(), std::move(out), {x, v}, [r, c](Node& self) {
    const auto& xv = value_of(self, 0);
    const auto& vv = value_of(self, 1);
    if (double* gx = sink(self, 0)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += self.grad[i * c + j] * vv[i];
    }
    if (double* gv = sink(self, 1)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gv[i] += self.grad[i * c + j] * xv[i * c + j];
    }
  });
}

Tensor broadcast_cols(const Tensor& v, std::size_t cols) {
  require(cols > 0, "broadcast_cols: zero columns");
  const std::size_t r = v.numel();
  const auto vv = v.data();
  std::vector<double> out(r * cols);
  for (std::size_t i = 0; i < r; ++i) std::fill_n(out.begin() + i * cols, cols, vv[i]);
  return make_result({r, cols}, std::move(out), {v}, [r, cols](Node& self) {
    if (double* gv = sink(self, 0)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < cols; ++j) gv[i] += self.grad[i * cols + j];
    }
  });
}

Tensor conv1d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t padding) {
  require_matrix(x, "conv1d");
  require(w.ndim() == 3, "conv1d: kernel must be [C_out x C_in x K], got " + shape_str(w.shape()));
  require(stride >= 1, "conv1d: stride must be >= 1");
  const std::size_t cin = x.rows(), t = x.cols();
  const std::size_t cout = w.dim(0), k = w.dim(2);
  require(w.dim(1) == cin, "conv1d: kernel expects " + std::to_string(w.dim(1)) + " input channels, got " +
                               std::to_string(cin));
  const std::size_t padded = t + 2 * padding;
  require(k <= padded, "conv1d: kernel width " + std::to_string(k) + " exceeds padded input " + std::to_string(padded));
  const std::size_t tout = (padded - k) / stride + 1;
  const std::size_t ck = cin * k;

  // im2col: col[(i*K + j), s] = xpad[i, s*stride + j]
  std::vector<double> col(ck * tout, 0.0);
  const auto xv = x.data();
  for (std::size_t i = 0; i < cin; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double* row = col.data() + (i * k + j) * tout;
      for (std::size_t s = 0; s < tout; ++s) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(s * stride + j) - static_cast<std::ptrdiff_t>(padding);
        if (src >= 0 && src < static_cast<std::ptrdiff_t>(t)) row[s] = xv[i * t + static_cast<std::size_t>(src)];
      }
    }
  }
  std::vector<double> out(cout * tout);
  MatMap(out.data(), cout, tout).noalias() = ConstMatMap(w.data().data(), cout, ck) * ConstMatMap(col.data(), ck, tout);

  return make_result({cout, tout}, std::move(out), {x, w},
                     [col = std::move(col), cin, t, cout, k, ck, tout, stride, padding](Node& self) {
                       ConstMatMap g(self.grad.data(), cout, tout);
                       if (double* gw = sink(self, 1)) {
                         MatMap(gw, cout, ck).noalias() += g * ConstMatMap(col.data(), ck, tout).transpose();
                       }
                       if (double* gx = sink(self, 0)) {
                         RowMat dcol = ConstMatMap(value_of(self, 1).data(), cout, ck).transpose() * g;
                         for (std::size_t i = 0; i < cin; ++i) {
                           for (std::size_t j = 0; j < k; ++j) {
                             const double* row = dcol.data() + (i * k + j) * tout;
                             for (std::size_t s = 0; s < tout; ++s) {
                               const std::ptrdiff_t dst = static_cast<std::ptrdiff_t>(s * stride + j) -
                                                          static_cast<std::ptrdiff_t>(padding);
                               if (dst >= 0 && dst < static_cast<std::ptrdiff_t>(t))
                                 gx[i * t + static_cast<std::size_t>(dst)] += row[s];
                             }
                           }
                         }
                       }
                     });
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride, std::size_t padding) {
  return add_per_row(conv1d(x, w, stride, padding), bias);
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  return unary(
      x, [negative_slope](double v) { return v >= 0.0 ? v : negative_slope * v; },
      [negative_slope](double v, double) { return v >= 0.0 ? 1.0 : negative_slope; });
}

Tensor silu(const Tensor& x) {
  return unary(
      x, [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v, double) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  // Treat a vector as a single row.
  const bool is_vector = x.ndim() == 1;
  require(is_vector || x.ndim() == 2, "softmax: expected vector or matrix");
  require(is_vector ? axis == 0 : axis < 2, "softmax: invalid axis " + std::to_string(axis));
  const std::size_t r = is_vector ? 1 : x.rows();
  const std::size_t c = is_vector ? x.numel() : x.cols();
  const bool along_cols = is_vector || axis == 1;  // normalize each row
  const std::size_t lanes = along_cols ? r : c;
  const std::size_t len = along_cols ? c : r;
  const std::size_t lane_stride = along_cols ? c : 1;
  const std::size_t elem_stride = along_cols ? 1 : c;

  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t l = 0; l < lanes; ++l) {
    const std::size_t base = l * lane_stride;
    double mx = xv[base];
    for (std::size_t e = 1; e < len; ++e) mx = std::max(mx, xv[base + e * elem_stride]);
    double total = 0.0;
    for (std::size_t e = 0; e < len; ++e) {
      const double ex = std::exp(xv[base + e * elem_stride] - mx);
      out[base + e * elem_stride] = ex;
      total += ex;
    }
    for (std::size_t e = 0; e < len; ++e) out[base + e * elem_stride] /= total;
  }
  return make_result(x.shape(), std::move(out), {x},
                     [lanes, len, lane_stride, elem_stride](Node& self) {
                       double* gx = sink(self, 0);
                       if (!gx) return;
                       for (std::size_t l = 0; l < lanes; ++l) {
                         const std::size_t base = l * lane_stride;
                         double dot = 0.0;
                         for (std::size_t e = 0; e < len; ++e) {
                           const std::size_t i = base + e * elem_stride;
                           dot += self.grad[i] * self.value[i];
                         }
                         for (std::size_t e = 0; e < len; ++e) {
                           const std::size_t i = base + e * elem_stride;
                           gx[i] += self.value[i] * (self.grad[i] - dot);
                         }
                       }
                     });
}

namespace {

// Shared normalization kernel: `members(g)` enumerates flat indices of
// normalization group g; every element belongs to exactly one group and
// takes affine parameters from its row (channel).
struct NormLayout {
  std::size_t rows, cols;
  std::size_t groups;
  bool per_column;  // layer norm: one group per column; group norm: row blocks
  std::size_t group_size() const { return per_column ? rows : (rows / groups) * cols; }
  template <typename F>
  void for_each(std::size_t g, F f) const {
    if (per_column) {
      for (std::size_t i = 0; i < rows; ++i) f(i * cols + g, i);
    } else {
      const std::size_t rpg = rows / groups;
      for (std::size_t i = g * rpg; i < (g + 1) * rpg; ++i)
        for (std::size_t j = 0; j < cols; ++j) f(i * cols + j, i);
    }
  }
  std::size_t count() const { return per_column ? cols : groups; }
};

Tensor normalize(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps, NormLayout layout,
                 const char* name) {
  require(gamma.numel() == layout.rows && beta.numel() == layout.rows,
          std::string(name) + ": affine parameters must have one entry per channel");
  const auto xv = x.data(), gv = gamma.data(), bv = beta.data();
  const double n = static_cast<double>(layout.group_size());
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(layout.count());
  std::vector<double> out(xv.size());
  for (std::size_t g = 0; g < layout.count(); ++g) {
    double mu = 0.0;
    layout.for_each(g, [&](std::size_t idx, std::size_t) { mu += xv[idx]; });
    mu /= n;
    double var = 0.0;
    layout.for_each(g, [&](std::size_t idx, std::size_t) { var += (xv[idx] - mu) * (xv[idx] - mu); });
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[g] = is;
    layout.for_each(g, [&](std::size_t idx, std::size_t row) {
      xhat[idx] = (xv[idx] - mu) * is;
      out[idx] = gv[row] * xhat[idx] + bv[row];
    });
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std), layout, n](Node& self) {
                       const auto& gv = value_of(self, 1);
                       if (double* gg = sink(self, 1)) {
                         for (std::size_t g = 0; g < layout.count(); ++g)
                           layout.for_each(g, [&](std::size_t idx, std::size_t row) {
                             gg[row] += self.grad[idx] * xhat[idx];
                           });
                       }
                       if (double* gb = sink(self, 2)) {
                         for (std::size_t g = 0; g < layout.count(); ++g)
                           layout.for_each(g, [&](std::size_t idx, std::size_t row) { gb[row] += self.grad[idx]; });
                       }
                       if (double* gx = sink(self, 0)) {
                         for (std::size_t g = 0; g < layout.count(); ++g) {
                           double sum_d = 0.0, sum_dx = 0.0;
                           layout.for_each(g, [&](std::size_t idx, std::size_t row) {
                             const double d = self.grad[idx] * gv[row];
                             sum_d += d;
                             sum_dx += d * xhat[idx];
                           });
                           const double is = inv_std[g];
                           layout.for_each(g, [&](std::size_t idx, std::size_t row) {
                             const double d = self.grad[idx] * gv[row];
                             gx[idx] += is * (d - sum_d / n - xhat[idx] * sum_dx / n);
                           });
                         }
                       }
                     });
}

}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_matrix(x, "layer_norm");
  return normalize(x, gamma, beta, eps, NormLayout{x.rows(), x.cols(), 0, true}, "layer_norm");
}

Tensor group_norm(const Tensor& x, std::size_t groups, const Tensor& gamma, const Tensor& beta, double eps) {
  require_matrix(x, "group_norm");
  require(groups >= 1 && x.rows() % groups == 0,
          "group_norm: " + std::to_string(x.rows()) + " channels not divisible into " + std::to_string(groups) +
              " groups");
  return normalize(x, gamma, beta, eps, NormLayout{x.rows(), x.cols(), groups, false}, "group_norm");
}

Tensor mean_cols(const Tensor& x) {
  require_matrix(x, "mean_cols");
  const std::size_t r = x.rows(), c = x.cols();
  const auto xv = x.data();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += xv[i * c + j];
    out[i] = s / static_cast<double>(c);
  }
  return make_result({r}, std::move(out), {x}, [r, c](Node& self) {
    if (double* gx = sink(self, 0)) {
      const double inv = 1.0 / static_cast<double>(c);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += self.grad[i] * inv;
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({1}, {s}, {x}, [](Node& self) {
    if (double* gx = sink(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) gx[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  const auto av = a.data(), bv = b.data();
  const double n = static_cast<double>(av.size());
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  return make_result({1}, {s / n}, {a, b}, [n](Node& self) {
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    const double k = 2.0 * self.grad[0] / n;
    if (double* ga = sink(self, 0)) {
      for (std::size_t i = 0; i < av.size(); ++i) ga[i] += k * (av[i] - bv[i]);
    }
    if (double* gb = sink(self, 1)) {
      for (std::size_t i = 0; i < av.size(); ++i) gb[i] -= k * (av[i] - bv[i]);
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: nothing to concatenate");
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    require(p.cols() == c, "concat_rows: column counts differ");
    r += p.rows();
  }
  std::vector<double> out;
  out.reserve(r * c);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result({r, c}, std::move(out), parts, [](Node& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      const std::size_t n = self.parents[p]->value.size();
      if (double* g = sink(self, p)) {
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows");
  require(begin < end && end <= x.rows(), "slice_rows: invalid range");
  const std::size_t c = x.cols();
  const auto xv = x.data();
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * c),
                          xv.begin() + static_cast<std::ptrdiff_t>(end * c));
  return make_result({end - begin, c}, std::move(out), {x}, [begin, c](Node& self) {
    if (double* g = sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * c + i] += self.grad[i];
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  require(begin < end && end <= x.cols(), "slice_cols: invalid range");
  const std::size_t r = x.rows(), c = x.cols(), w = end - begin;
  const auto xv = x.data();
  std::vector<double> out(r * w);
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(i * c + begin), w, out.begin() + static_cast<std::ptrdiff_t>(i * w));
  return make_result({r, w}, std::move(out), {x}, [r, c, w, begin](Node& self) {
    if (double* g = sink(self, 0)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += self.grad[i * w + j];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(shape_numel(shape) == x.numel(), "reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  return make_result(std::move(shape), x.to_vector(), {x}, [](Node& self) {
    if (double* g = sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor straight_through(const Tensor& x, const Tensor& quantized) {
  require_same_shape(x, quantized, "straight_through");
  return make_result(x.shape(), quantized.to_vector(), {x}, [](Node& self) {
    if (double* g = sink(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor interpolation_matrix(std::size_t t_in, std::size_t t_out) {
  require(t_in >= 1 && t_out >= 1, "interpolation_matrix: lengths must be positive");
  std::vector<double> m(t_in * t_out, 0.0);
  for (std::size_t j = 0; j < t_out; ++j) {
    if (t_in == 1 || t_out == 1) {
      m[j] = 1.0;
      continue;
    }
    const double pos = static_cast<double>(j) * static_cast<double>(t_in - 1) / static_cast<double>(t_out - 1);
    std::size_t i0 = static_cast<std::size_t>(std::floor(pos));
    if (i0 >= t_in - 1) i0 = t_in - 2;
    const double frac = pos - static_cast<double>(i0);
    m[i0 * t_out + j] += 1.0 - frac;
    m[(i0 + 1) * t_out + j] += frac;
  }
  return Tensor::from({t_in, t_out}, std::move(m));
}

Tensor interpolate_time(const Tensor& x, std::size_t t_out) {
  require_matrix(x, "interpolate_time");
  if (x.cols() == t_out) return x;
  return matmul(x, interpolation_matrix(x.cols(), t_out));
}

}  // namespace flowvc::num
