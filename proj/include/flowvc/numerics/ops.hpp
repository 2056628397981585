#pragma once

#include <cstddef>
#include <vector>

#include "flowvc/numerics/tensor.hpp"

namespace flowvc::num {

// Sequences inside networks are channel-major: [channels x time].
// Per-channel vectors (biases, norm affines, FiLM gamma/beta) are 1-D [C].

/// c[i,j] = sum_k a[i,k] * b[k,j].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Element-wise (Hadamard) product.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

/// x[c,t] + v[c]
Tensor add_per_row(const Tensor& x, const Tensor& v);
/// x[c,t] * v[c]
Tensor mul_per_row(const Tensor& x, const Tensor& v);
/// [C] -> [C x cols], each column a copy of v.
Tensor broadcast_cols(const Tensor& v, std::size_t cols);

/// 1-D convolution over time, cross-correlation convention (no kernel flip):
///   y[o,t] = sum_{i,k} w[o,i,k] * xpad[i, t*stride + k]
/// with xpad zero-padded by `padding` on both ends. x is [C_in x T],
/// w is [C_out x C_in x K], output is [C_out x T'] with
/// T' = floor((T + 2*padding - K) / stride) + 1.
Tensor conv1d(const Tensor& x, const Tensor& w, std::size_t stride = 1, std::size_t padding = 0);
/// conv1d followed by a per-output-channel bias.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
              std::size_t padding);

Tensor leaky_relu(const Tensor& x, double negative_slope);
Tensor silu(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Max-subtracted softmax along `axis` (0 or 1 for matrices, 0 for vectors).
Tensor softmax(const Tensor& x, std::size_t axis);

/// Normalizes each column of x [C x T] over its C channels, then applies
/// per-channel gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
/// Group normalization of x [C x T]: statistics over (channels in group x time).
Tensor group_norm(const Tensor& x, std::size_t groups, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

/// [C x T] -> [C], mean over time.
Tensor mean_cols(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// mean((a - b)^2) over all elements.
Tensor mse(const Tensor& a, const Tensor& b);

/// Stacks matrices with equal column counts along the channel axis.
Tensor concat_rows(const std::vector<Tensor>& parts);
/// Rows [begin, end) of a matrix.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
/// Columns [begin, end) of a matrix.
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);

/// Same values under a new shape with equal element count.
Tensor reshape(const Tensor& x, Shape shape);

/// Forward value is `quantized`; the gradient passes unchanged to `x`.
Tensor straight_through(const Tensor& x, const Tensor& quantized);

/// Linear interpolation matrix M [T_in x T_out] such that x * M resamples a
/// [C x T_in] track to T_out frames with endpoints aligned:
/// output frame j samples input position j * (T_in - 1) / (T_out - 1).
Tensor interpolation_matrix(std::size_t t_in, std::size_t t_out);
/// Resamples x [C x T_in] along time to T_out frames (identity when equal).
Tensor interpolate_time(const Tensor& x, std::size_t t_out);

}  // namespace flowvc::num
