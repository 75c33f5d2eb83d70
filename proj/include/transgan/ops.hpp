// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "transgan/tensor.hpp"

TRANSGAN_BEGIN_NAMESPACE

// Binary elementwise ops accept identical shapes, or one operand with a
// single element which is broadcast as a scalar. Anything else is a
// DimensionError; other alignments go through explicit reshape/expand ops.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, Real s);
Tensor mul_scalar(const Tensor& a, Real s);
/// Broadcast a single-element tensor to `shape`.
Tensor expand_scalar(const Tensor& s, const Shape& shape);

Tensor exp(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
/// 1/x, with 0 mapped to 0 (keeps the norm gradient finite at the origin).
Tensor safe_reciprocal(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
/// Exact GELU x * Phi(x) with the erf-based normal CDF.
Tensor gelu(const Tensor& x);
/// k-th derivative of GELU, k in [1, 4]. Each order differentiates into the
/// next, so GELU supports the gradient-of-gradient chain.
Tensor gelu_derivative(const Tensor& x, int order);

/// Sum of every element, rank-0 result.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Reduce the last axis, keeping it with extent 1.
Tensor sum_last(const Tensor& x);
Tensor mean_last(const Tensor& x);
/// Inverse shape move of sum_last: repeat a trailing extent-1 axis n times.
Tensor expand_last(const Tensor& x, std::size_t n);
/// Reduce every axis but the last: [..., C] -> [C].
Tensor sum_leading(const Tensor& x);
/// Repeat a [C] vector over the leading axes of `shape` ([..., C]).
Tensor broadcast_leading(const Tensor& x, const Shape& shape);
/// x[..., C] + bias[C].
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// x[..., C] * scale[C].
Tensor mul_bias(const Tensor& x, const Tensor& scale);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);
Tensor transpose_last2(const Tensor& x);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
/// Adjoint of slice: embeds x at [start, start+len) of a zero tensor whose
/// `axis` extent is `full`.
Tensor pad_slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t full);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

/// [M,K] x [K,N] -> [M,N].
Tensor matmul(const Tensor& a, const Tensor& b);
/// [B,M,K] x [B,K,N] -> [B,M,N].
Tensor bmm(const Tensor& a, const Tensor& b);
/// x[..., K] x W[K, N] + b[N]; `bias` may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Max-subtracted softmax over the last axis. -inf entries act as a mask and
/// map to exactly 0; a slice without any finite entry raises MaskError.
Tensor softmax_last(const Tensor& x);

inline constexpr Real kLayerNormEps = static_cast<Real>(1e-5);
/// Normalizes over the last axis, then applies gamma * xhat + beta.
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 Real eps = kLayerNormEps);

/// Per-image integer shift of a [B,H,W,C] batch with zero fill:
/// out[b, y, x] = in[b, y - dy, x - dx]. shifts[b] = {dy, dx}.
Tensor translate(const Tensor& images, const std::vector<std::array<int, 2>>& shifts);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, Real s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, Real s) { return add_scalar(a, -s); }
inline Tensor operator*(const Tensor& a, Real s) { return mul_scalar(a, s); }
inline Tensor operator*(Real s, const Tensor& a) { return mul_scalar(a, s); }

TRANSGAN_END_NAMESPACE
