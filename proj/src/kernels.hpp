// SPDX-License-Identifier: Apache-2.0
// Dense kernels shared by the op implementations. Internal to the library.
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>

#include "transgan/precision.hpp"

TRANSGAN_BEGIN_NAMESPACE
namespace kernels {

using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutableMap = Eigen::Map<RowMatrix>;

inline ConstMap view(const Real* data, std::size_t rows, std::size_t cols) {
  return ConstMap(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

inline MutableMap view(Real* data, std::size_t rows, std::size_t cols) {
  return MutableMap(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

/// c[M,N] = a[M,K] * b[K,N], all row-major.
inline void gemm(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
  view(c, m, n).noalias() = view(a, m, k) * view(b, k, n);
}

/// e^x. The single-precision version is a branch-free range reduction with
/// a degree-7 polynomial (within 2 ulp) that the compiler can vectorize;
/// arguments below -87 return 0.
inline double exp_kernel(double x) { return std::exp(x); }

inline float exp_kernel(float x) {
  const bool underflow = x < -87.0f;
  x = underflow ? -87.0f : x;
  x = x > 88.0f ? 88.0f : x;
  constexpr float log2e = 1.44269504088896341f;
  constexpr float ln2_hi = 0.693145751953125f;
  constexpr float ln2_lo = 1.42860682030941723e-6f;
  constexpr float shifter = 12582912.0f;  // 1.5 * 2^23, rounds to nearest
  const float kf = (x * log2e + shifter) - shifter;
  const float r = (x - kf * ln2_hi) - kf * ln2_lo;
  float p = 1.0f / 5040.0f;
  p = p * r + 1.0f / 720.0f;
  p = p * r + 1.0f / 120.0f;
  p = p * r + 1.0f / 24.0f;
  p = p * r + 1.0f / 6.0f;
  p = p * r + 0.5f;
  p = p * r + 1.0f;
  p = p * r + 1.0f;
  const auto bits = static_cast<std::uint32_t>(static_cast<std::int32_t>(kf) + 127) << 23;
  const float value = p * std::bit_cast<float>(bits);
  return underflow ? 0.0f : value;
}

/// Sum in a fixed order over 16 interleaved lanes, so the loop vectorizes
/// without reassociation and the result does not depend on the target.
inline Real lane_sum(const Real* x, std::size_t n) {
  constexpr std::size_t kLanes = 16;
  Real lanes[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) lanes[l] += x[i + l];
  Real total = 0;
  for (std::size_t l = 0; l < kLanes; ++l) total += lanes[l];
  for (; i < n; ++i) total += x[i];
  return total;
}

inline Real lane_max(const Real* x, std::size_t n) {
  constexpr std::size_t kLanes = 16;
  Real lanes[kLanes];
  std::fill(lanes, lanes + kLanes, std::numeric_limits<Real>::lowest());
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) lanes[l] = x[i + l] > lanes[l] ? x[i + l] : lanes[l];
  Real best = std::numeric_limits<Real>::lowest();
  for (std::size_t l = 0; l < kLanes; ++l) best = lanes[l] > best ? lanes[l] : best;
  for (; i < n; ++i) best = x[i] > best ? x[i] : best;
  return best;
}

}  // namespace kernels
TRANSGAN_END_NAMESPACE
