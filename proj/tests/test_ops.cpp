// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>

#include "support/gradcheck.hpp"
#include "transgan/ops.hpp"

using namespace transgan;
using transgan::testing::gradcheck;
using transgan::testing::random_tensor;

namespace {

constexpr int kSeeds = 20;
constexpr double kPrimitiveTol = 1e-4;

void check_primitive(const char* name, const transgan::testing::Function& f,
                     const std::vector<Shape>& shapes, double scale = 1.0, double offset = 0.0) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed) + 1);
    std::vector<Tensor> inputs;
    for (const auto& s : shapes) {
      Tensor t = random_tensor(s, rng, scale);
      if (offset != 0.0)
        for (auto& v : t.mutable_data()) v = std::abs(v) + offset;
      inputs.push_back(t);
    }
    const auto r = gradcheck(f, inputs, kPrimitiveTol, static_cast<std::uint64_t>(seed));
    INFO(name << " seed " << seed << ": " << r.detail);
    CHECK(r.ok);
  }
}

Tensor T(Shape s, std::vector<Real> v) { return Tensor(std::move(s), std::move(v)); }

}  // namespace

TEST_CASE("elementwise gradients") {
  check_primitive("add", [](auto& x) { return add(x[0], x[1]); }, {{3, 4}, {3, 4}});
  check_primitive("add scalar broadcast", [](auto& x) { return add(x[0], x[1]); }, {{3, 4}, {1}});
  check_primitive("sub", [](auto& x) { return sub(x[0], x[1]); }, {{5}, {5}});
  check_primitive("mul", [](auto& x) { return mul(x[0], x[1]); }, {{2, 3}, {2, 3}});
  check_primitive("mul broadcast", [](auto& x) { return mul(x[1], x[0]); }, {{2, 3}, {}});
  check_primitive("neg", [](auto& x) { return neg(x[0]); }, {{4}});
  check_primitive("add_scalar", [](auto& x) { return add_scalar(x[0], 0.5); }, {{4}});
  check_primitive("mul_scalar", [](auto& x) { return mul_scalar(x[0], -1.5); }, {{4}});
  check_primitive("expand_scalar", [](auto& x) { return expand_scalar(x[0], {2, 3}); }, {{}});
  check_primitive("exp", [](auto& x) { return exp(x[0]); }, {{6}});
  check_primitive("sqrt", [](auto& x) { return sqrt(x[0]); }, {{6}}, 1.0, 0.5);
  check_primitive("square", [](auto& x) { return square(x[0]); }, {{6}});
  check_primitive("safe_reciprocal", [](auto& x) { return safe_reciprocal(x[0]); }, {{6}}, 1.0, 0.5);
  check_primitive("tanh", [](auto& x) { return tanh(x[0]); }, {{6}});
  check_primitive("gelu", [](auto& x) { return gelu(x[0]); }, {{8}}, 2.0);
  for (int order = 1; order <= 3; ++order)
    check_primitive("gelu_derivative", [order](auto& x) { return gelu_derivative(x[0], order); },
                    {{8}}, 2.0);
}

TEST_CASE("relu gradient away from the kink") {
  check_primitive("relu", [](auto& x) { return relu(x[0]); }, {{6}}, 1.0, 0.1);
  check_primitive("relu negative", [](auto& x) { return relu(neg(x[0])); }, {{6}}, 1.0, 0.1);
}

TEST_CASE("reduction and shape gradients") {
  check_primitive("sum", [](auto& x) { return sum(x[0]); }, {{2, 3}});
  check_primitive("mean", [](auto& x) { return mean(x[0]); }, {{2, 3}});
  check_primitive("sum_last", [](auto& x) { return sum_last(x[0]); }, {{2, 3, 4}});
  check_primitive("mean_last", [](auto& x) { return mean_last(x[0]); }, {{2, 5}});
  check_primitive("expand_last", [](auto& x) { return expand_last(x[0], 3); }, {{2, 1}});
  check_primitive("sum_leading", [](auto& x) { return sum_leading(x[0]); }, {{2, 3, 4}});
  check_primitive("broadcast_leading", [](auto& x) { return broadcast_leading(x[0], {2, 3, 4}); },
                  {{4}});
  check_primitive("add_bias", [](auto& x) { return add_bias(x[0], x[1]); }, {{2, 3, 4}, {4}});
  check_primitive("mul_bias", [](auto& x) { return mul_bias(x[0], x[1]); }, {{2, 3, 4}, {4}});
  check_primitive("reshape", [](auto& x) { return reshape(x[0], {6, 2}); }, {{3, 4}});
  check_primitive("permute", [](auto& x) { return permute(x[0], {2, 0, 1}); }, {{2, 3, 4}});
  check_primitive("transpose_last2", [](auto& x) { return transpose_last2(x[0]); }, {{2, 3, 4}});
  check_primitive("slice", [](auto& x) { return slice(x[0], 1, 1, 2); }, {{2, 4, 3}});
  check_primitive("pad_slice", [](auto& x) { return pad_slice(x[0], 0, 1, 4); }, {{2, 3}});
  check_primitive("concat", [](auto& x) { return concat({x[0], x[1]}, 1); }, {{2, 3}, {2, 2}});
}

TEST_CASE("contraction and normalization gradients") {
  check_primitive("matmul", [](auto& x) { return matmul(x[0], x[1]); }, {{3, 4}, {4, 2}});
  check_primitive("bmm", [](auto& x) { return bmm(x[0], x[1]); }, {{2, 3, 4}, {2, 4, 5}});
  check_primitive("linear", [](auto& x) { return linear(x[0], x[1], x[2]); },
                  {{2, 3, 4}, {4, 5}, {5}});
  check_primitive("linear no bias", [](auto& x) { return linear(x[0], x[1], Tensor()); },
                  {{3, 4}, {4, 2}});
  check_primitive("softmax_last", [](auto& x) { return softmax_last(x[0]); }, {{3, 5}}, 2.0);
  check_primitive("layernorm", [](auto& x) { return layernorm(x[0], x[1], x[2]); },
                  {{2, 3, 6}, {6}, {6}});
  check_primitive("translate", [](auto& x) { return translate(x[0], {{1, -2}, {0, 3}}); },
                  {{2, 4, 5, 3}});
}

TEST_CASE("forward values") {
  SUBCASE("gelu matches x Phi(x)") {
    const Tensor y = gelu(T({3}, {-1, 0, 2}));
    CHECK(y[0] == doctest::Approx(-0.15865525393145707).epsilon(1e-12));
    CHECK(y[1] == 0);
    CHECK(y[2] == doctest::Approx(1.9544997361036416).epsilon(1e-12));
  }
  SUBCASE("softmax treats -inf as a hard mask") {
    const Real inf = std::numeric_limits<Real>::infinity();
    const Tensor p = softmax_last(T({1, 3}, {0, -inf, 0}));
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0);
    CHECK(p[2] == 0.5);
    CHECK_THROWS_AS(softmax_last(T({1, 2}, {-inf, -inf})), MaskError);
  }
  SUBCASE("softmax is shift invariant and stable") {
    const Tensor p = softmax_last(T({2}, {1000, 1001}));
    CHECK(p[1] == doctest::Approx(1 / (1 + std::exp(-1.0))));
  }
  SUBCASE("layernorm normalizes the last axis") {
    const Tensor y = layernorm(T({1, 4}, {1, 2, 3, 4}), Tensor::ones({4}), Tensor::zeros({4}), 0);
    const double sd = std::sqrt(1.25);
    CHECK(y[0] == doctest::Approx(-1.5 / sd));
    CHECK(y[3] == doctest::Approx(1.5 / sd));
  }
  SUBCASE("matmul") {
    const Tensor c = matmul(T({2, 2}, {1, 2, 3, 4}), T({2, 1}, {5, 6}));
    CHECK(c[0] == 17);
    CHECK(c[1] == 39);
  }
  SUBCASE("permute reorders axes") {
    const Tensor x = T({2, 3}, {0, 1, 2, 3, 4, 5});
    const Tensor y = permute(x, {1, 0});
    CHECK(y.shape() == Shape{3, 2});
    CHECK(std::vector<Real>(y.data().begin(), y.data().end()) == std::vector<Real>{0, 3, 1, 4, 2, 5});
  }
  SUBCASE("translate fills with zeros") {
    const Tensor x = T({1, 1, 3, 1}, {1, 2, 3});
    const Tensor y = translate(x, {{0, 1}});
    CHECK(std::vector<Real>(y.data().begin(), y.data().end()) == std::vector<Real>{0, 1, 2});
  }
  SUBCASE("safe_reciprocal maps zero to zero") {
    CHECK(safe_reciprocal(T({2}, {0, 4}))[0] == 0);
    CHECK(safe_reciprocal(T({2}, {0, 4}))[1] == 0.25);
  }
}

TEST_CASE("shape errors") {
  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), DimensionError);
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
  CHECK_THROWS_AS(reshape(Tensor::zeros({2, 3}), {4}), DimensionError);
  CHECK_THROWS_AS(permute(Tensor::zeros({2, 3}), {0, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), DimensionError);
  CHECK_THROWS(gelu_derivative(Tensor::zeros({1}), 5));
}
