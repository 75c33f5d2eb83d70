// SPDX-License-Identifier: Apache-2.0
#include "transgan/ops.hpp"

#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

TRANSGAN_BEGIN_NAMESPACE

namespace {

using Data = std::vector<Real>;

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_to_string(a.shape()) +
                       " and " + shape_to_string(b.shape()));
}

template <class F>
Data map_unary(const Tensor& x, F f) {
  Data out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return out;
}

template <class F>
Data map_binary(const Tensor& a, const Tensor& b, F f) {
  Data out(a.numel());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i]);
  return out;
}

// Aligns a binary op's operands: identical shapes pass through, a
// single-element operand is expanded to the other's shape.
bool align(const char* op, Tensor& a, Tensor& b) {
  if (a.shape() == b.shape()) return true;
  if (b.numel() == 1) {
    b = expand_scalar(b, a.shape());
    return true;
  }
  if (a.numel() == 1) {
    a = expand_scalar(a, b.shape());
    return true;
  }
  shape_error(op, a, b);
}

// Splits `shape` around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

std::size_t last_extent(const Tensor& x) {
  if (x.rank() == 0) throw DimensionError("operation needs at least one axis, got a scalar");
  return x.shape().back();
}

using kernels::gemm;

Real normal_pdf(Real x) {
  constexpr Real inv_sqrt_2pi = Real(0.5) * std::numbers::inv_sqrtpi_v<Real> * std::numbers::sqrt2_v<Real>;
  return std::exp(Real(-0.5) * x * x) * inv_sqrt_2pi;
}

Real normal_cdf(Real x) { return Real(0.5) * std::erfc(-x / std::numbers::sqrt2_v<Real>); }

}  // namespace

// ---------------------------------------------------------------- elementwise

Tensor add(const Tensor& a_in, const Tensor& b_in) {
  Tensor a = a_in, b = b_in;
  align("add", a, b);
  return make_op_result(a.shape(), map_binary(a, b, [](Real x, Real y) { return x + y; }), "add",
                        {a, b}, [](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{g, g};
                        });
}

Tensor sub(const Tensor& a_in, const Tensor& b_in) {
  Tensor a = a_in, b = b_in;
  align("sub", a, b);
  return make_op_result(a.shape(), map_binary(a, b, [](Real x, Real y) { return x - y; }), "sub",
                        {a, b}, [](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{g, neg(g)};
                        });
}

Tensor mul(const Tensor& a_in, const Tensor& b_in) {
  Tensor a = a_in, b = b_in;
  align("mul", a, b);
  return make_op_result(a.shape(), map_binary(a, b, [](Real x, Real y) { return x * y; }), "mul",
                        {a, b}, [a, b](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{
                              a.requires_grad() ? mul(g, b) : Tensor{},
                              b.requires_grad() ? mul(g, a) : Tensor{}};
                        });
}

Tensor neg(const Tensor& a) {
  return make_op_result(a.shape(), map_unary(a, [](Real x) { return -x; }), "neg", {a},
                        [](const Tensor& g, const Tensor&) { return std::vector<Tensor>{neg(g)}; });
}

Tensor add_scalar(const Tensor& a, Real s) {
  return make_op_result(a.shape(), map_unary(a, [s](Real x) { return x + s; }), "add_scalar", {a},
                        [](const Tensor& g, const Tensor&) { return std::vector<Tensor>{g}; });
}

Tensor mul_scalar(const Tensor& a, Real s) {
  return make_op_result(a.shape(), map_unary(a, [s](Real x) { return x * s; }), "mul_scalar", {a},
                        [s](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{mul_scalar(g, s)};
                        });
}

Tensor expand_scalar(const Tensor& s, const Shape& shape) {
  if (s.numel() != 1)
    throw DimensionError("expand_scalar: expected a single element, got " +
                         shape_to_string(s.shape()));
  Shape source = s.shape();
  return make_op_result(shape, Data(shape_numel(shape), s.data()[0]), "expand_scalar", {s},
                        [source](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{reshape(sum(g), source)};
                        });
}

Tensor exp(const Tensor& x) {
  return make_op_result(x.shape(), map_unary(x, [](Real v) { return std::exp(v); }), "exp", {x},
                        [](const Tensor& g, const Tensor& out) {
                          return std::vector<Tensor>{mul(g, out)};
                        });
}

Tensor sqrt(const Tensor& x) {
  return make_op_result(x.shape(), map_unary(x, [](Real v) { return std::sqrt(v); }), "sqrt", {x},
                        [](const Tensor& g, const Tensor& out) {
                          return std::vector<Tensor>{mul_scalar(mul(g, safe_reciprocal(out)), 0.5)};
                        });
}

Tensor square(const Tensor& x) {
  return make_op_result(x.shape(), map_unary(x, [](Real v) { return v * v; }), "square", {x},
                        [x](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{mul_scalar(mul(g, x), 2)};
                        });
}

Tensor safe_reciprocal(const Tensor& x) {
  return make_op_result(
      x.shape(), map_unary(x, [](Real v) { return v == Real(0) ? Real(0) : Real(1) / v; }),
      "safe_reciprocal", {x}, [](const Tensor& g, const Tensor& out) {
        return std::vector<Tensor>{neg(mul(g, square(out)))};
      });
}

Tensor tanh(const Tensor& x) {
  return make_op_result(x.shape(), map_unary(x, [](Real v) { return std::tanh(v); }), "tanh", {x},
                        [](const Tensor& g, const Tensor& out) {
                          return std::vector<Tensor>{mul(g, add_scalar(neg(square(out)), 1))};
                        });
}

Tensor relu(const Tensor& x) {
  return make_op_result(x.shape(), map_unary(x, [](Real v) { return v > 0 ? v : Real(0); }), "relu",
                        {x}, [x](const Tensor& g, const Tensor&) {
                          Tensor step(x.shape(), map_unary(x, [](Real v) {
                                        return v > 0 ? Real(1) : Real(0);
                                      }));
                          return std::vector<Tensor>{mul(g, step)};
                        });
}

Tensor gelu(const Tensor& x) {
  return make_op_result(x.shape(), map_unary(x, [](Real v) { return v * normal_cdf(v); }), "gelu",
                        {x}, [x](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{mul(g, gelu_derivative(x, 1))};
                        });
}

Tensor gelu_derivative(const Tensor& x, int order) {
  // With phi the normal density:
  //   d1 = Phi + x phi,   d2 = phi (2 - x^2),
  //   d3 = phi (x^3 - 4x), d4 = phi (-x^4 + 7x^2 - 4).
  Data out;
  switch (order) {
    case 1:
      out = map_unary(x, [](Real v) { return normal_cdf(v) + v * normal_pdf(v); });
      break;
    case 2:
      out = map_unary(x, [](Real v) { return normal_pdf(v) * (2 - v * v); });
      break;
    case 3:
      out = map_unary(x, [](Real v) { return normal_pdf(v) * (v * v * v - 4 * v); });
      break;
    case 4:
      out = map_unary(x, [](Real v) {
        const Real v2 = v * v;
        return normal_pdf(v) * (-v2 * v2 + 7 * v2 - 4);
      });
      break;
    default:
      throw std::invalid_argument("gelu_derivative: order must be in [1, 4]");
  }
  return make_op_result(x.shape(), std::move(out), "gelu_derivative", {x},
                        [x, order](const Tensor& g, const Tensor&) {
                          if (order == 4)
                            throw GraphError("gelu: derivatives beyond fourth order unsupported");
                          return std::vector<Tensor>{mul(g, gelu_derivative(x, order + 1))};
                        });
}

// ----------------------------------------------------------------- reductions

Tensor sum(const Tensor& x) {
  Real total = 0;
  for (auto v : x.data()) total += v;
  Shape source = x.shape();
  return make_op_result(Shape{}, Data{total}, "sum", {x}, [source](const Tensor& g, const Tensor&) {
    return std::vector<Tensor>{expand_scalar(g, source)};
  });
}

Tensor mean(const Tensor& x) { return mul_scalar(sum(x), Real(1) / static_cast<Real>(x.numel())); }

Tensor sum_last(const Tensor& x) {
  const auto n = last_extent(x);
  const auto rows = x.numel() / n;
  Data out(rows, 0);
  auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    Real acc = 0;
    for (std::size_t j = 0; j < n; ++j) acc += in[r * n + j];
    out[r] = acc;
  }
  Shape shape = x.shape();
  shape.back() = 1;
  return make_op_result(shape, std::move(out), "sum_last", {x}, [n](const Tensor& g, const Tensor&) {
    return std::vector<Tensor>{expand_last(g, n)};
  });
}

Tensor mean_last(const Tensor& x) {
  return mul_scalar(sum_last(x), Real(1) / static_cast<Real>(last_extent(x)));
}

Tensor expand_last(const Tensor& x, std::size_t n) {
  if (last_extent(x) != 1)
    throw DimensionError("expand_last: last extent must be 1, got " + shape_to_string(x.shape()));
  const auto rows = x.numel();
  Data out(rows * n);
  auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) std::fill_n(out.begin() + r * n, n, in[r]);
  Shape shape = x.shape();
  shape.back() = n;
  return make_op_result(shape, std::move(out), "expand_last", {x}, [](const Tensor& g, const Tensor&) {
    return std::vector<Tensor>{sum_last(g)};
  });
}

Tensor sum_leading(const Tensor& x) {
  const auto c = last_extent(x);
  const auto rows = x.numel() / c;
  Data out(c, 0);
  auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) out[j] += in[r * c + j];
  Shape source = x.shape();
  return make_op_result(Shape{c}, std::move(out), "sum_leading", {x},
                        [source](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{broadcast_leading(g, source)};
                        });
}

Tensor broadcast_leading(const Tensor& x, const Shape& shape) {
  if (x.rank() != 1 || shape.empty() || shape.back() != x.dim(0))
    throw DimensionError("broadcast_leading: cannot broadcast " + shape_to_string(x.shape()) +
                         " to " + shape_to_string(shape));
  const auto c = x.dim(0);
  const auto rows = shape_numel(shape) / c;
  Data out(rows * c);
  auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) std::copy(in.begin(), in.end(), out.begin() + r * c);
  return make_op_result(shape, std::move(out), "broadcast_leading", {x},
                        [](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{sum_leading(g)};
                        });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const auto c = last_extent(x);
  if (bias.rank() != 1 || bias.dim(0) != c) shape_error("add_bias", x, bias);
  Data out(x.data().begin(), x.data().end());
  auto b = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % c];
  return make_op_result(x.shape(), std::move(out), "add_bias", {x, bias},
                        [](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{g, sum_leading(g)};
                        });
}

Tensor mul_bias(const Tensor& x, const Tensor& scale) {
  const auto c = last_extent(x);
  if (scale.rank() != 1 || scale.dim(0) != c) shape_error("mul_bias", x, scale);
  Data out(x.data().begin(), x.data().end());
  auto s = scale.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s[i % c];
  return make_op_result(x.shape(), std::move(out), "mul_bias", {x, scale},
                        [x, scale](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{
                              x.requires_grad() ? mul_bias(g, scale) : Tensor{},
                              scale.requires_grad() ? sum_leading(mul(g, x)) : Tensor{}};
                        });
}

// ---------------------------------------------------------------------- shape

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                         shape_to_string(shape));
  if (shape == x.shape()) return x;
  Shape source = x.shape();
  return make_op_result(std::move(shape), x.impl()->storage, "reshape", {x},
                        [source](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{reshape(g, source)};
                        });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const auto rank = x.rank();
  if (perm.size() != rank) throw DimensionError("permute: rank mismatch");
  std::vector<bool> seen(rank, false);
  for (auto p : perm) {
    if (p >= rank || seen[p]) throw DimensionError("permute: invalid permutation");
    seen[p] = true;
  }
  const Shape& in_shape = x.shape();
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in_shape[perm[i]];

  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  std::vector<std::size_t> step(rank);
  for (std::size_t i = 0; i < rank; ++i) step[i] = in_strides[perm[i]];

  Data out(x.numel());
  auto in = x.data();
  // Odometer over the outer axes; the innermost output axis is a strided run.
  const std::size_t run = rank ? out_shape[rank - 1] : 1;
  const std::size_t run_step = rank ? step[rank - 1] : 0;
  std::vector<std::size_t> index(rank, 0);
  std::size_t offset = 0;
  for (std::size_t o = 0; o < out.size(); o += run) {
    Real* dst = out.data() + o;
    const Real* src = in.data() + offset;
    if (run_step == 1)
      std::copy(src, src + run, dst);
    else
      for (std::size_t i = 0; i < run; ++i) dst[i] = src[i * run_step];
    for (std::size_t axis = rank - (rank ? 1 : 0); axis-- > 0;) {
      offset += step[axis];
      if (++index[axis] < out_shape[axis]) break;
      offset -= step[axis] * out_shape[axis];
      index[axis] = 0;
    }
  }
  std::vector<std::size_t> inverse(rank);
  for (std::size_t i = 0; i < rank; ++i) inverse[perm[i]] = i;
  return make_op_result(std::move(out_shape), std::move(out), "permute", {x},
                        [inverse](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{permute(g, inverse)};
                        });
}

Tensor transpose_last2(const Tensor& x) {
  if (x.rank() < 2) throw DimensionError("transpose_last2: need rank >= 2");
  std::vector<std::size_t> perm(x.rank());
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[x.rank() - 1], perm[x.rank() - 2]);
  return permute(x, perm);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank() || length == 0 || start + length > x.dim(axis))
    throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") invalid on axis " +
                         std::to_string(axis) + " of " + shape_to_string(x.shape()));
  const auto s = split_axis(x.shape(), axis);
  Data out(s.outer * length * s.inner);
  auto in = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(in.begin() + (o * s.extent + start) * s.inner, length * s.inner,
                out.begin() + o * length * s.inner);
  Shape shape = x.shape();
  shape[axis] = length;
  const auto full = s.extent;
  return make_op_result(std::move(shape), std::move(out), "slice", {x},
                        [axis, start, full](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{pad_slice(g, axis, start, full)};
                        });
}

Tensor pad_slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t full) {
  if (axis >= x.rank() || start + x.dim(axis) > full)
    throw DimensionError("pad_slice: cannot place " + shape_to_string(x.shape()) + " at " +
                         std::to_string(start) + " in extent " + std::to_string(full));
  const auto s = split_axis(x.shape(), axis);
  Data out(s.outer * full * s.inner, 0);
  auto in = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(in.begin() + o * s.extent * s.inner, s.extent * s.inner,
                out.begin() + (o * full + start) * s.inner);
  Shape shape = x.shape();
  shape[axis] = full;
  const auto length = s.extent;
  return make_op_result(std::move(shape), std::move(out), "pad_slice", {x},
                        [axis, start, length](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{slice(g, axis, start, length)};
                        });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Tensor& first = parts.front();
  if (axis >= first.rank()) throw DimensionError("concat: axis out of range");
  std::size_t total = 0;
  std::vector<std::size_t> extents;
  for (const auto& p : parts) {
    if (p.rank() != first.rank()) shape_error("concat", first, p);
    for (std::size_t i = 0; i < p.rank(); ++i)
      if (i != axis && p.dim(i) != first.dim(i)) shape_error("concat", first, p);
    extents.push_back(p.dim(axis));
    total += p.dim(axis);
  }
  const auto s = split_axis(first.shape(), axis);
  Data out(s.outer * total * s.inner);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto len = p.dim(axis);
    auto in = p.data();
    for (std::size_t o = 0; o < s.outer; ++o)
      std::copy_n(in.begin() + o * len * s.inner, len * s.inner,
                  out.begin() + (o * total + offset) * s.inner);
    offset += len;
  }
  Shape shape = first.shape();
  shape[axis] = total;
  return make_op_result(std::move(shape), std::move(out), "concat", parts,
                        [axis, extents](const Tensor& g, const Tensor&) {
                          std::vector<Tensor> grads;
                          std::size_t start = 0;
                          for (auto len : extents) {
                            grads.push_back(slice(g, axis, start, len));
                            start += len;
                          }
                          return grads;
                        });
}

// ------------------------------------------------------------- linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_error("matmul", a, b);
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Data out(m * n);
  gemm(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_op_result(Shape{m, n}, std::move(out), "matmul", {a, b},
                        [a, b](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{
                              a.requires_grad() ? matmul(g, transpose_last2(b)) : Tensor{},
                              b.requires_grad() ? matmul(transpose_last2(a), g) : Tensor{}};
                        });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1))
    shape_error("bmm", a, b);
  const auto batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  Data out(batch * m * n);
  for (std::size_t i = 0; i < batch; ++i)
    gemm(a.data().data() + i * m * k, b.data().data() + i * k * n, out.data() + i * m * n, m, k, n);
  return make_op_result(Shape{batch, m, n}, std::move(out), "bmm", {a, b},
                        [a, b](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{
                              a.requires_grad() ? bmm(g, transpose_last2(b)) : Tensor{},
                              b.requires_grad() ? bmm(transpose_last2(a), g) : Tensor{}};
                        });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || last_extent(x) != weight.dim(0)) shape_error("linear", x, weight);
  Tensor flat = reshape(x, Shape{x.numel() / weight.dim(0), weight.dim(0)});
  Tensor y = matmul(flat, weight);
  if (bias.defined()) y = add_bias(y, bias);
  Shape shape = x.shape();
  shape.back() = weight.dim(1);
  return reshape(y, std::move(shape));
}

// ----------------------------------------------------------------- nn helpers

Tensor softmax_last(const Tensor& x) {
  const auto n = last_extent(x);
  const auto rows = x.numel() / n;
  Data out(x.numel());
  auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = in.data() + r * n;
    Real* dst = out.data() + r * n;
    const Real peak = *std::max_element(row, row + n);
    if (peak == -std::numeric_limits<Real>::infinity())
      throw MaskError("softmax: slice " + std::to_string(r) + " is fully masked");
    Real total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      dst[j] = std::exp(row[j] - peak);
      total += dst[j];
    }
    const Real inv = Real(1) / total;
    for (std::size_t j = 0; j < n; ++j) dst[j] *= inv;
  }
  return make_op_result(x.shape(), std::move(out), "softmax", {x},
                        [n](const Tensor& g, const Tensor& y) {
                          Tensor dot = expand_last(sum_last(mul(g, y)), n);
                          return std::vector<Tensor>{mul(y, sub(g, dot))};
                        });
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps) {
  const auto c = last_extent(x);
  if (gamma.rank() != 1 || gamma.dim(0) != c) shape_error("layernorm gamma", x, gamma);
  if (beta.rank() != 1 || beta.dim(0) != c) shape_error("layernorm beta", x, beta);
  Tensor centered = sub(x, expand_last(mean_last(x), c));
  Tensor variance = mean_last(square(centered));
  Tensor inv_std = safe_reciprocal(sqrt(add_scalar(variance, eps)));
  Tensor normalized = mul(centered, expand_last(inv_std, c));
  return add_bias(mul_bias(normalized, gamma), beta);
}

Tensor translate(const Tensor& images, const std::vector<std::array<int, 2>>& shifts) {
  if (images.rank() != 4 || shifts.size() != images.dim(0))
    throw DimensionError("translate: expected [B,H,W,C] with one shift per image, got " +
                         shape_to_string(images.shape()));
  const auto batch = images.dim(0);
  const int h = static_cast<int>(images.dim(1)), w = static_cast<int>(images.dim(2));
  const auto c = images.dim(3);
  Data out(images.numel(), 0);
  auto in = images.data();
  for (std::size_t b = 0; b < batch; ++b) {
    const int dy = shifts[b][0], dx = shifts[b][1];
    const std::size_t base = b * static_cast<std::size_t>(h * w) * c;
    for (int y = 0; y < h; ++y) {
      const int sy = y - dy;
      if (sy < 0 || sy >= h) continue;
      for (int xx = 0; xx < w; ++xx) {
        const int sx = xx - dx;
        if (sx < 0 || sx >= w) continue;
        std::copy_n(in.begin() + base + (static_cast<std::size_t>(sy * w + sx)) * c, c,
                    out.begin() + base + static_cast<std::size_t>(y * w + xx) * c);
      }
    }
  }
  std::vector<std::array<int, 2>> inverse(shifts.size());
  for (std::size_t b = 0; b < shifts.size(); ++b) inverse[b] = {-shifts[b][0], -shifts[b][1]};
  return make_op_result(images.shape(), std::move(out), "translate", {images},
                        [inverse](const Tensor& g, const Tensor&) {
                          return std::vector<Tensor>{translate(g, inverse)};
                        });
}

TRANSGAN_END_NAMESPACE
