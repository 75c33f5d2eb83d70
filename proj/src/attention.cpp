// SPDX-License-Identifier: Apache-2.0
#include "transgan/attention.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "transgan/ops.hpp"
#include "kernels.hpp"

TRANSGAN_BEGIN_NAMESPACE

AttentionWindow AttentionWindow::of(std::size_t size) {
  if (size == 0) throw std::invalid_argument("attention window must be positive");
  return AttentionWindow(size);
}

std::string AttentionWindow::to_string() const {
  return bounded() ? std::to_string(size_) : std::string("full");
}

bool AttentionMask::allowed(std::size_t i, std::size_t j) const {
  if (allows_all()) return true;
  const auto yi = i / side, xi = i % side, yj = j / side, xj = j % side;
  const auto dy = yi > yj ? yi - yj : yj - yi;
  const auto dx = xi > xj ? xi - xj : xj - xi;
  return std::max(dy, dx) < window.size();
}

Tensor mask_bias(const AttentionMask& mask) {
  const auto n = mask.tokens();
  std::vector<Real> bias(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!mask.allowed(i, j)) bias[i * n + j] = std::numeric_limits<Real>::lowest();
  return Tensor(Shape{n, n}, std::move(bias));
}

namespace {

void check_operands(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask* mask) {
  if (q.rank() != 3 || k.shape() != q.shape() || v.shape() != q.shape())
    throw DimensionError("attention: q, k, v must share a [G,N,d] shape, got " +
                         shape_to_string(q.shape()) + ", " + shape_to_string(k.shape()) + ", " +
                         shape_to_string(v.shape()));
  if (mask && mask->tokens() != q.dim(1))
    throw DimensionError("attention: mask grid " + std::to_string(mask->side) + "x" +
                         std::to_string(mask->side) + " does not cover " +
                         std::to_string(q.dim(1)) + " tokens");
}

// Queries [q0, q1) all see keys inside [k0, k1). Under a locality mask a
// block is one grid row, whose visible keys form a contiguous band of grid
// rows; the remaining column constraint is applied per entry.
struct QueryBlock {
  std::size_t q0, q1, k0, k1;
};

class BlockPlan {
 public:
  static constexpr std::size_t kDenseRows = 64;

  BlockPlan(std::size_t n, const AttentionMask* mask) {
    if (mask && !mask->allows_all()) {
      side_ = mask->side;
      window_ = mask->window.size();
      const auto radius = window_ - 1;
      for (std::size_t y = 0; y < side_; ++y) {
        const auto y0 = y > radius ? y - radius : 0, y1 = std::min(side_ - 1, y + radius);
        blocks_.push_back({y * side_, (y + 1) * side_, y0 * side_, (y1 + 1) * side_});
      }
    } else {
      for (std::size_t q = 0; q < n; q += kDenseRows) blocks_.push_back({q, std::min(n, q + kDenseRows), 0, n});
    }
  }

  const std::vector<QueryBlock>& blocks() const { return blocks_; }
  std::size_t widest() const {
    std::size_t w = 0;
    for (const auto& b : blocks_) w = std::max(w, (b.q1 - b.q0) * (b.k1 - b.k0));
    return w;
  }

  /// Scaled scores of one block with disallowed entries set to the most
  /// negative finite value.
  void scores(const QueryBlock& b, const Real* q, const Real* k, std::size_t d, Real scale,
              Real* out) const {
    const auto rows = b.q1 - b.q0, cols = b.k1 - b.k0;
    auto s = kernels::view(out, rows, cols);
    s.noalias() = kernels::view(q + b.q0 * d, rows, d) * kernels::view(k + b.k0 * d, cols, d).transpose();
    s *= scale;
    if (!side_) return;
    // Keys come in whole grid rows, so each query row allows one column
    // segment per band row.
    constexpr Real blocked = std::numeric_limits<Real>::lowest();
    const auto radius = window_ - 1;
    for (std::size_t r = 0; r < rows; ++r) {
      const auto xi = (b.q0 + r) % side_;
      const auto lo = xi > radius ? xi - radius : 0, hi = std::min(side_ - 1, xi + radius);
      for (std::size_t band = 0; band < cols; band += side_) {
        Real* row = out + r * cols + band;
        std::fill(row, row + lo, blocked);
        std::fill(row + hi + 1, row + side_, blocked);
      }
    }
  }

 private:
  std::vector<QueryBlock> blocks_;
  std::size_t side_ = 0, window_ = 0;
};

std::vector<Tensor> composite_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                                       const Tensor& grad_out, const AttentionMask* mask) {
  const auto groups = q.dim(0), n = q.dim(1), d = q.dim(2);
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(d));
  Tensor scores = mul_scalar(bmm(q, transpose_last2(k)), scale);
  if (mask && !mask->allows_all()) {
    Tensor bias = reshape(mask_bias(*mask), Shape{n * n});
    scores = add(scores, reshape(broadcast_leading(bias, Shape{groups, n * n}), Shape{groups, n, n}));
  }
  Tensor probs = softmax_last(scores);
  Tensor grad_v = bmm(transpose_last2(probs), grad_out);
  Tensor grad_p = bmm(grad_out, transpose_last2(v));
  Tensor row_dot = expand_last(sum_last(mul(grad_p, probs)), n);
  Tensor grad_s = mul_scalar(mul(probs, sub(grad_p, row_dot)), scale);
  return {bmm(grad_s, k), bmm(transpose_last2(grad_s), q), grad_v};
}

}  // namespace

Tensor attention_composite(const Tensor& q, const Tensor& k, const Tensor& v,
                           const AttentionMask* mask) {
  check_operands(q, k, v, mask);
  const auto groups = q.dim(0), n = q.dim(1), d = q.dim(2);
  Tensor scores = mul_scalar(bmm(q, transpose_last2(k)), Real(1) / std::sqrt(static_cast<Real>(d)));
  if (mask && !mask->allows_all()) {
    Tensor bias = reshape(mask_bias(*mask), Shape{n * n});
    scores = add(scores, reshape(broadcast_leading(bias, Shape{groups, n * n}), Shape{groups, n, n}));
  }
  return bmm(softmax_last(scores), v);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask* mask) {
  check_operands(q, k, v, mask);
  const auto groups = q.dim(0), n = q.dim(1), d = q.dim(2);
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(d));
  const BlockPlan plan(n, mask);

  std::vector<Real> out(q.numel());
  auto lse = std::make_shared<std::vector<Real>>(groups * n);
  std::vector<Real> probs(plan.widest());
  auto qd = q.data(), kd = k.data(), vd = v.data();

  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t base = g * n * d;
    for (const auto& b : plan.blocks()) {
      const auto rows = b.q1 - b.q0, cols = b.k1 - b.k0;
      plan.scores(b, qd.data() + base, kd.data() + base, d, scale, probs.data());
      for (std::size_t r = 0; r < rows; ++r) {
        Real* row = probs.data() + r * cols;
        const Real peak = kernels::lane_max(row, cols);
        for (std::size_t c = 0; c < cols; ++c) row[c] = kernels::exp_kernel(row[c] - peak);
        const Real total = kernels::lane_sum(row, cols);
        const Real inv = Real(1) / total;
        for (std::size_t c = 0; c < cols; ++c) row[c] *= inv;
        (*lse)[g * n + b.q0 + r] = peak + std::log(total);
      }
      kernels::view(out.data() + base + b.q0 * d, rows, d).noalias() =
          kernels::view(probs.data(), rows, cols) * kernels::view(vd.data() + base + b.k0 * d, cols, d);
    }
  }

  std::shared_ptr<const AttentionMask> saved_mask =
      mask ? std::make_shared<const AttentionMask>(*mask) : nullptr;
  return make_op_result(
      q.shape(), std::move(out), "attention", {q, k, v},
      [q, k, v, lse, saved_mask](const Tensor& grad_out, const Tensor& out_t) {
        if (grad_enabled()) return composite_backward(q, k, v, grad_out, saved_mask.get());

        const auto groups = q.dim(0), n = q.dim(1), d = q.dim(2);
        const Real scale = Real(1) / std::sqrt(static_cast<Real>(d));
        const BlockPlan plan(n, saved_mask.get());
        std::vector<Real> dq(q.numel()), dk(k.numel(), 0), dv(v.numel(), 0);
        std::vector<Real> probs(plan.widest()), dprobs(plan.widest());
        auto qd = q.data(), kd = k.data(), vd = v.data(), od = out_t.data(), gd = grad_out.data();
        for (std::size_t g = 0; g < groups; ++g) {
          const std::size_t base = g * n * d;
                for (const auto& b : plan.blocks()) {
            const auto rows = b.q1 - b.q0, cols = b.k1 - b.k0;
            const auto qb = kernels::view(qd.data() + base + b.q0 * d, rows, d);
            const auto gb = kernels::view(gd.data() + base + b.q0 * d, rows, d);
            const auto kb = kernels::view(kd.data() + base + b.k0 * d, cols, d);
            const auto vb = kernels::view(vd.data() + base + b.k0 * d, cols, d);
            plan.scores(b, qd.data() + base, kd.data() + base, d, scale, probs.data());
            auto p = kernels::view(probs.data(), rows, cols);
            auto dp = kernels::view(dprobs.data(), rows, cols);
            dp.noalias() = gb * vb.transpose();
            for (std::size_t r = 0; r < rows; ++r) {
              const auto i = b.q0 + r;
              const Real row_lse = (*lse)[g * n + i];
              Real row_dot = 0;
              for (std::size_t c = 0; c < d; ++c) row_dot += gd[base + i * d + c] * od[base + i * d + c];
              Real* prow = probs.data() + r * cols;
              Real* dsrow = dprobs.data() + r * cols;
              for (std::size_t c = 0; c < cols; ++c) prow[c] = kernels::exp_kernel(prow[c] - row_lse);
              for (std::size_t c = 0; c < cols; ++c) dsrow[c] = prow[c] * (dsrow[c] - row_dot) * scale;
            }
            // dprobs now holds the score gradient.
            kernels::view(dq.data() + base + b.q0 * d, rows, d).noalias() = dp * kb;
            kernels::view(dk.data() + base + b.k0 * d, cols, d).noalias() += dp.transpose() * qb;
            kernels::view(dv.data() + base + b.k0 * d, cols, d).noalias() += p.transpose() * gb;
          }
        }
        return std::vector<Tensor>{Tensor(q.shape(), std::move(dq)), Tensor(k.shape(), std::move(dk)),
                                   Tensor(v.shape(), std::move(dv))};
      });
}

TRANSGAN_END_NAMESPACE
