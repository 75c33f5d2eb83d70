// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "transgan/ops.hpp"

using namespace transgan;

TEST_CASE("leaf gradients accumulate across uses") {
  Tensor x(Shape{2}, {3, -1}, true);
  // f = sum(x*x + 2x) -> df/dx = 2x + 2
  backward(sum(add(mul(x, x), mul_scalar(x, 2))));
  REQUIRE(x.grad().defined());
  CHECK(x.grad()[0] == 8);
  CHECK(x.grad()[1] == 0);

  backward(sum(x));
  CHECK(x.grad()[0] == 9);
  x.zero_grad();
  CHECK((!x.grad().defined() || x.grad()[0] == 0));
}

TEST_CASE("a consumed graph cannot be replayed") {
  Tensor x(Shape{}, {2}, true);
  Tensor y = mul(x, x);
  backward(y);
  CHECK_THROWS_AS(backward(y), GraphError);

  Tensor z = mul(x, x);
  backward(z, true);
  CHECK_NOTHROW(backward(z));
}

TEST_CASE("backward needs a scalar") {
  Tensor x(Shape{2}, {1, 2}, true);
  CHECK_THROWS_AS(backward(mul_scalar(x, 2)), GraphError);
}

TEST_CASE("no-grad mode records nothing") {
  Tensor x(Shape{1}, {1}, true);
  Tensor y;
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    y = exp(x);
  }
  CHECK(grad_enabled());
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node() == nullptr);
}

TEST_CASE("detach and clone") {
  Tensor x(Shape{2}, {1, 2}, true);
  Tensor y = mul_scalar(x, 3);
  Tensor d = y.detach();
  CHECK_FALSE(d.requires_grad());
  CHECK(d[1] == 6);
  Tensor c = x.clone();
  c.mutable_data()[0] = 7;
  CHECK(x[0] == 1);
}

TEST_CASE("input_gradient is differentiable") {
  // f(x) = sum(x^3); df/dx = 3x^2; d/dx sum(df/dx) = 6x.
  Tensor x(Shape{2}, {1, -2}, true);
  Tensor f = sum(mul(square(x), x));
  Tensor g = input_gradient(f, x);
  CHECK(g[0] == doctest::Approx(3));
  CHECK(g[1] == doctest::Approx(12));
  CHECK_FALSE(x.grad().defined());
  backward(sum(g));
  CHECK(x.grad()[0] == doctest::Approx(6));
  CHECK(x.grad()[1] == doctest::Approx(-12));
}

TEST_CASE("input_gradient of an unrelated tensor") {
  Tensor x(Shape{1}, {1}, true);
  Tensor y(Shape{1}, {1}, true);
  CHECK_THROWS_AS(input_gradient(sum(x), y), GraphError);
}

TEST_CASE("requires_grad is only settable on leaves") {
  Tensor x(Shape{1}, {1}, true);
  Tensor y = exp(x);
  CHECK_THROWS_AS(y.set_requires_grad(false), GraphError);
  x.set_requires_grad(false);
  CHECK_FALSE(exp(x).requires_grad());
}

TEST_CASE("scalar and item") {
  CHECK(Tensor::scalar(2.5).item() == 2.5);
  CHECK(Tensor::scalar(2.5).rank() == 0);
  CHECK_THROWS(Tensor::zeros({2}).item());
  CHECK(Tensor::full({2, 2}, 3).numel() == 4);
  CHECK(shape_to_string({2, 3}) == "(2,3)");
}
