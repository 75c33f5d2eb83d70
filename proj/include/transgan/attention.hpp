// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <limits>
#include <string>

#include "transgan/tensor.hpp"

TRANSGAN_BEGIN_NAMESPACE

/// Side length of the square attention neighbourhood, or unbounded.
class AttentionWindow {
 public:
  static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

  constexpr AttentionWindow() = default;
  static constexpr AttentionWindow unbounded() { return AttentionWindow(); }
  static AttentionWindow of(std::size_t size);

  constexpr bool bounded() const { return size_ != kUnbounded; }
  constexpr std::size_t size() const { return size_; }
  std::string to_string() const;

  friend constexpr bool operator==(AttentionWindow a, AttentionWindow b) { return a.size_ == b.size_; }
  friend constexpr bool operator<(AttentionWindow a, AttentionWindow b) { return a.size_ < b.size_; }
  friend constexpr bool operator<=(AttentionWindow a, AttentionWindow b) { return a.size_ <= b.size_; }

 private:
  constexpr explicit AttentionWindow(std::size_t size) : size_(size) {}
  std::size_t size_ = kUnbounded;
};

/// Locality mask over a side x side token grid (tokens in row-major order).
/// Token j is visible from token i when the Chebyshev distance between their
/// grid positions is below the window.
struct AttentionMask {
  AttentionWindow window;
  std::size_t side = 1;

  bool allowed(std::size_t i, std::size_t j) const;
  bool allows_all() const { return !window.bounded() || window.size() >= side; }
  std::size_t tokens() const { return side * side; }
};

/// Scaled dot-product attention over [G, N, d] (G = batch x heads):
/// softmax(q k^T / sqrt(d) + mask_bias) v, where the bias is 0 on allowed
/// pairs and the most negative finite value elsewhere. Disallowed pairs are
/// skipped outright in the fused kernel, which is equivalent because their
/// weights underflow to exactly 0.
///
/// The first-order backward recomputes probabilities from saved row
/// log-sum-exps. When a gradient graph is being recorded (double backprop),
/// the backward is instead expressed with differentiable primitives.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const AttentionMask* mask = nullptr);

/// Reference composite of the same computation built from bmm/softmax.
Tensor attention_composite(const Tensor& q, const Tensor& k, const Tensor& v,
                           const AttentionMask* mask = nullptr);

/// [N, N] additive bias: 0 where allowed, lowest finite Real elsewhere.
Tensor mask_bias(const AttentionMask& mask);

TRANSGAN_END_NAMESPACE
