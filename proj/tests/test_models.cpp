// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "support/gradcheck.hpp"
#include "transgan/discriminator.hpp"
#include "transgan/generator.hpp"

using namespace transgan;
using namespace transgan::testing;

namespace {

GeneratorConfig mini_generator() {
  GeneratorConfig c;
  c.initial_grid = 2;
  c.initial_dim = 16;
  c.stage_depths = {1, 1};
  c.target_resolution = 4;
  c.latent_dim = 3;
  c.mlp_ratio = 2;
  c.head_count = 2;
  return c;
}

DiscriminatorConfig mini_discriminator() {
  DiscriminatorConfig c;
  c.patch_grid = 2;
  c.embed_dim = 4;
  c.depth = 1;
  c.head_count = 2;
  c.mlp_ratio = 2;
  c.input_resolution = 4;
  return c;
}

std::vector<Tensor> tensors(const NamedParams& named) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

std::size_t total_size(const NamedParams& named) {
  std::size_t n = 0;
  for (const auto& [name, t] : named) n += t.numel();
  return n;
}

}  // namespace

TEST_CASE("miniature generator gradients") {
  const auto config = mini_generator();
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 1);
    GeneratorParams g = init_generator(config, rng);
    auto leaves = tensors(generator_parameters(g));
    scramble(leaves, rng, 0.3);
    Tensor z = random_tensor({2, 3}, rng);
    leaves.push_back(z);
    const Tensor w = random_tensor({2, 4, 4, 3}, rng, 1.0, false);
    const auto window = seed % 2 ? AttentionWindow::of(1) : AttentionWindow::unbounded();
    auto r = gradcheck_leaves([&] { return sum(mul(generate(z, g, config, window), w)); }, leaves,
                              1e-3);
    INFO("seed " << seed << ": " << r.detail);
    CHECK(r.ok);
  }
}

TEST_CASE("miniature super-resolution path gradients") {
  const auto config = mini_generator();
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 300);
    GeneratorParams g = init_generator(config, rng);
    auto leaves = tensors(generator_parameters(g));
    scramble(leaves, rng, 0.3);
    const Tensor lr = random_tensor({2, 2, 2, 3}, rng, 0.5, false);
    const Tensor w = random_tensor({2, 4, 4, 3}, rng, 1.0, false);
    auto r = gradcheck_leaves([&] { return sum(mul(super_resolve(lr, g, config), w)); }, leaves,
                              1e-3);
    INFO("seed " << seed << ": " << r.detail);
    CHECK(r.ok);
  }
}

TEST_CASE("miniature discriminator gradients") {
  const auto config = mini_discriminator();
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 1);
    DiscriminatorParams d = init_discriminator(config, rng);
    auto leaves = tensors(discriminator_parameters(d));
    scramble(leaves, rng, 0.3);
    Tensor images = random_tensor({2, 4, 4, 3}, rng);
    leaves.push_back(images);
    const Tensor w = random_tensor({2}, rng, 1.0, false);
    auto r = gradcheck_leaves([&] { return sum(mul(discriminate(images, d, config), w)); }, leaves,
                              1e-3);
    INFO("seed " << seed << ": " << r.detail);
    CHECK(r.ok);
  }
}

TEST_CASE("parameter counts") {
  Rng rng(1);
  const auto g = mini_generator();
  CHECK(total_size(generator_parameters(init_generator(g, rng))) == parameter_count(g));
  const auto d = mini_discriminator();
  CHECK(total_size(discriminator_parameters(init_discriminator(d, rng))) == parameter_count(d));
  const auto tiny = GeneratorConfig::preset("tiny");
  CHECK(total_size(generator_parameters(init_generator(tiny, rng))) == parameter_count(tiny));
}

TEST_CASE("generator output range and shapes") {
  Rng rng(4);
  const auto config = mini_generator();
  GeneratorParams g = init_generator(config, rng);
  auto leaves = tensors(generator_parameters(g));
  scramble(leaves, rng, 2.0);
  const Tensor img = generate(random_tensor({5, 3}, rng, 1.0, false), g, config);
  CHECK(img.shape() == Shape{5, 4, 4, 3});
  for (auto v : img.data()) CHECK((v >= -1 && v <= 1));
  CHECK(generate(random_tensor({3}, rng, 1.0, false), g, config).shape() == Shape{4, 4, 3});
  CHECK_THROWS_AS(generate(random_tensor({2, 4}, rng), g, config), DimensionError);
  CHECK_THROWS_AS(super_resolve(random_tensor({1, 4, 4, 3}, rng), g, config), DimensionError);
}

TEST_CASE("window at least the grid side changes nothing") {
  Rng rng(8);
  const auto config = mini_generator();
  GeneratorParams g = init_generator(config, rng);
  const Tensor z = random_tensor({2, 3}, rng, 1.0, false);
  const Tensor a = generate(z, g, config);
  const Tensor b = generate(z, g, config, AttentionWindow::of(4));
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("patchify ordering") {
  std::vector<Real> v(4 * 4 * 3);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<Real>(i);
  const Tensor p = patchify(Tensor(Shape{4, 4, 3}, v), 2);
  REQUIRE(p.shape() == Shape{4, 12});
  // Patch 1 is grid (0, 1): rows 0-1, cols 2-3.
  CHECK(p[1 * 12 + 0] == v[(0 * 4 + 2) * 3]);
  CHECK(p[1 * 12 + 3] == v[(0 * 4 + 3) * 3]);
  CHECK(p[1 * 12 + 6] == v[(1 * 4 + 2) * 3]);
  CHECK_THROWS_AS(patchify(Tensor::zeros({5, 5, 3}), 2), DimensionError);
}

TEST_CASE("discriminator scores one value per image") {
  Rng rng(2);
  const auto config = mini_discriminator();
  DiscriminatorParams d = init_discriminator(config, rng);
  CHECK(discriminate(random_tensor({3, 4, 4, 3}, rng), d, config).shape() == Shape{3});
  CHECK(discriminate(random_tensor({4, 4, 3}, rng), d, config).rank() == 0);
  CHECK_THROWS_AS(discriminate(random_tensor({1, 8, 8, 3}, rng), d, config), DimensionError);
}

TEST_CASE("downsample averages boxes") {
  std::vector<Real> v(1 * 2 * 2 * 3);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<Real>(i);
  const Tensor d = downsample_average(Tensor(Shape{1, 2, 2, 3}, v), 2);
  REQUIRE(d.shape() == Shape{1, 1, 1, 3});
  CHECK(d[0] == doctest::Approx((0 + 3 + 6 + 9) / 4.0));
  CHECK(d[2] == doctest::Approx((2 + 5 + 8 + 11) / 4.0));
  CHECK_THROWS_AS(downsample_average(Tensor::zeros({1, 3, 3, 3}), 2), DimensionError);
}

TEST_CASE("config validation names the key") {
  auto c = mini_generator();
  c.initial_dim = 6;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("initial_dim"), ConfigError);
  c = mini_generator();
  c.target_resolution = 8;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("target_resolution"), ConfigError);
  CHECK_THROWS_AS(GeneratorConfig::preset("huge"), ConfigError);
  CHECK_THROWS_AS(GeneratorConfig::preset("tiny").with_variant("mnist"), ConfigError);
  auto d = mini_discriminator();
  d.head_count = 3;
  CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("d_heads"), ConfigError);
}
