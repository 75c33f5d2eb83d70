// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "support/gradcheck.hpp"
#include "transgan/nn.hpp"

using namespace transgan;
using namespace transgan::testing;

namespace {

std::vector<Tensor> tensors(const NamedParams& named) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

}  // namespace

TEST_CASE("encoder block gradients") {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 1);
    EncoderBlockParams block = init_encoder_block(4, 2, 2, rng);
    NamedParams named;
    collect(block, "b", named);
    auto leaves = tensors(named);
    scramble(leaves, rng, 0.4);
    Tensor x = random_tensor({2, 4, 4}, rng);
    leaves.push_back(x);
    const AttentionMask mask{AttentionWindow::of(1 + seed % 2), 2};
    const Tensor w = random_tensor({2, 4, 4}, rng, 1.0, false);
    auto r = gradcheck_leaves([&] { return sum(mul(encoder_block(x, block, &mask), w)); }, leaves,
                              1e-3);
    INFO("seed " << seed << ": " << r.detail);
    CHECK(r.ok);
  }
}

TEST_CASE("multi-head attention with one head reduces to attention") {
  Rng rng(5);
  AttentionParams p;
  p.heads = 1;
  for (auto* l : {&p.query, &p.key, &p.value, &p.proj}) *l = init_linear(3, 3, rng);
  const Tensor x = random_tensor({1, 4, 3}, rng, 1.0, false);
  const Tensor eye(Shape{3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  p.proj = {eye, Tensor::zeros({3})};
  const Tensor expected =
      attention(linear(x, p.query.weight, p.query.bias), linear(x, p.key.weight, p.key.bias),
                linear(x, p.value.weight, p.value.bias));
  const Tensor got = multi_head_self_attention(x, p);
  for (std::size_t i = 0; i < got.numel(); ++i) CHECK(got[i] == doctest::Approx(expected[i]));
}

TEST_CASE("heads split the channels evenly") {
  Rng rng(2);
  EncoderBlockParams block = init_encoder_block(8, 4, 4, rng);
  CHECK(encoder_block(random_tensor({3, 8}, rng), block).shape() == Shape{3, 8});
  CHECK_THROWS(init_encoder_block(6, 4, 4, rng));
  AttentionMask wrong{AttentionWindow::of(1), 3};
  CHECK_THROWS_AS(encoder_block(random_tensor({1, 4, 8}, rng), block, &wrong), DimensionError);
}

TEST_CASE("parameter count matches the collected tensors") {
  Rng rng(1);
  for (std::size_t dim : {4, 16, 64}) {
    NamedParams named;
    collect(init_encoder_block(dim, 4, 4, rng), "b", named);
    std::size_t total = 0;
    for (const auto& [name, t] : named) total += t.numel();
    CHECK(total == encoder_block_param_count(dim, 4));
  }
  // 12 C^2 + 13 C at ratio 4
  CHECK(encoder_block_param_count(384, 4) == 12 * 384 * 384 + 13 * 384);
}

TEST_CASE("pixelshuffle follows the channel-to-space formula") {
  const std::size_t side = 2, c = 8;
  std::vector<Real> v(side * side * c);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<Real>(i);
  const TokenGrid in{Tensor(Shape{1, side * side, c}, v), side, 0};
  const TokenGrid out = pixelshuffle_upsample(in);
  REQUIRE(out.side == 2 * side);
  REQUIRE(out.tokens.shape() == Shape{1, 16, 2});
  CHECK(out.stage == 1);
  for (std::size_t y = 0; y < 2 * side; ++y)
    for (std::size_t x = 0; x < 2 * side; ++x)
      for (std::size_t ch = 0; ch < c / 4; ++ch) {
        const std::size_t src_token = (y / 2) * side + x / 2;
        const std::size_t src_channel = 4 * ch + 2 * (y % 2) + (x % 2);
        CHECK(out.tokens[(y * 2 * side + x) * (c / 4) + ch] == v[src_token * c + src_channel]);
      }
  CHECK_THROWS_AS(pixelshuffle_upsample({Tensor::zeros({1, 4, 6}), 2, 0}), DimensionError);
  CHECK_THROWS_AS(pixelshuffle_upsample({Tensor::zeros({1, 5, 4}), 2, 0}), DimensionError);
}

TEST_CASE("pixelshuffle and positional embedding gradients") {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 50);
    auto r = gradcheck([](auto& x) { return pixelshuffle_upsample({x[0], 2, 0}).tokens; },
                       {random_tensor({2, 4, 8}, rng)}, 1e-4, seed);
    CHECK(r.ok);
    r = gradcheck([](auto& x) { return positional_embedding_add(x[0], x[1]); },
                  {random_tensor({2, 4, 3}, rng), random_tensor({4, 3}, rng)}, 1e-4, seed);
    CHECK(r.ok);
  }
}

TEST_CASE("truncated normal initializer stays within two deviations") {
  Rng rng(9);
  const Tensor t = truncated_normal({1000}, 0.02, rng);
  for (auto v : t.data()) CHECK(std::abs(v) <= 0.04);
  CHECK(t.requires_grad());
}
