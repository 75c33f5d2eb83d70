// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "transgan/attention.hpp"
#include "transgan/discriminator.hpp"
#include "transgan/generator.hpp"

using namespace transgan;

namespace {

Tensor noise(const Shape& shape, Rng& rng) {
  std::vector<Real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<Real>(rng.normal());
  return Tensor(shape, std::move(v));
}

const Shape* find(const ShapeTrace& trace, const std::string& name) {
  for (const auto& [n, s] : trace)
    if (n == name) return &s;
  return nullptr;
}

}  // namespace

TEST_CASE("XL generator token and width trace") {
  const auto config = GeneratorConfig::preset("transgan-xl");
  Rng rng(1);
  const auto g = init_generator(config, rng);
  ShapeTrace trace;
  NoGradGuard guard;
  const Tensor img = generate(noise({1, config.latent_dim}, rng), g, config,
                              AttentionWindow::unbounded(), &trace);
  CHECK(img.shape() == Shape{1, 32, 32, 3});
  REQUIRE(find(trace, "input_mlp"));
  CHECK(*find(trace, "input_mlp") == Shape{64, 1024});
  CHECK(*find(trace, "stage0.block4") == Shape{64, 1024});
  CHECK(*find(trace, "stage1.pixelshuffle") == Shape{256, 256});
  CHECK(*find(trace, "stage1.block3") == Shape{256, 256});
  CHECK(*find(trace, "stage2.pixelshuffle") == Shape{1024, 64});
  CHECK(*find(trace, "stage2.block1") == Shape{1024, 64});
  CHECK(*find(trace, "to_rgb") == Shape{32, 32, 3});
  CHECK(trace.size() == 1 + 5 + 1 + 4 + 1 + 2 + 1);
}

TEST_CASE("discriminator trace") {
  const auto config = DiscriminatorConfig::preset("transgan-xl");
  Rng rng(2);
  const auto d = init_discriminator(config, rng);
  ShapeTrace trace;
  NoGradGuard guard;
  const Tensor scores = discriminate(noise({2, 32, 32, 3}, rng), d, config, &trace);
  CHECK(scores.shape() == Shape{2});
  CHECK(*find(trace, "embed") == Shape{65, 384});
  for (int b = 0; b < 7; ++b) CHECK(*find(trace, "block" + std::to_string(b)) == Shape{65, 384});
  CHECK(find(trace, "block7") == nullptr);
  CHECK(*find(trace, "head") == Shape{1});
}

TEST_CASE("STL layout starts from 144 tokens") {
  const auto config = GeneratorConfig::preset("transgan-s").with_variant("stl");
  CHECK(config.stage_tokens(0) == 144);
  Rng rng(3);
  const auto g = init_generator(config, rng);
  ShapeTrace trace;
  NoGradGuard guard;
  const Tensor img = generate(noise({1, config.latent_dim}, rng), g, config,
                              AttentionWindow::unbounded(), &trace);
  CHECK(*find(trace, "input_mlp") == Shape{144, 384});
  CHECK(img.shape() == Shape{1, 48, 48, 3});
}

TEST_CASE("CelebA layout has four stages") {
  const auto config = GeneratorConfig::preset("transgan-s").with_variant("celeba");
  CHECK(config.stage_depths == std::vector<std::size_t>{5, 3, 3, 2});
  Rng rng(4);
  const auto g = init_generator(config, rng);
  NoGradGuard guard;
  const Tensor img = generate(noise({1, config.latent_dim}, rng), g, config);
  CHECK(img.shape() == Shape{1, 64, 64, 3});
  for (auto v : img.data()) CHECK(std::isfinite(v));
}

TEST_CASE("a window covering the grid is bit-identical to no mask") {
  Rng rng(5);
  for (std::size_t side : {2, 4, 8}) {
    const std::size_t n = side * side;
    const Tensor q = noise({3, n, 4}, rng), k = noise({3, n, 4}, rng), v = noise({3, n, 4}, rng);
    const Tensor plain = attention(q, k, v);
    const Tensor plain_composite = attention_composite(q, k, v);
    for (std::size_t w : {side, side + 1, 2 * side}) {
      const AttentionMask mask{AttentionWindow::of(w), side};
      const Tensor masked = attention(q, k, v, &mask);
      CHECK(std::equal(plain.data().begin(), plain.data().end(), masked.data().begin()));
      const Tensor composite = attention_composite(q, k, v, &mask);
      CHECK(std::equal(plain_composite.data().begin(), plain_composite.data().end(),
                       composite.data().begin()));
    }
  }
  // Full generator forward.
  const auto config = GeneratorConfig::preset("tiny");
  const auto g = init_generator(config, rng);
  const Tensor z = noise({2, config.latent_dim}, rng);
  NoGradGuard guard;
  const Tensor a = generate(z, g, config);
  const Tensor b = generate(z, g, config, AttentionWindow::of(32));
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}
