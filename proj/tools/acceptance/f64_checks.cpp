// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <cmath>
#include <sstream>

#include "checks.hpp"
#include "support/gradcheck.hpp"
#include "transgan/discriminator.hpp"
#include "transgan/generator.hpp"
#include "transgan/metrics.hpp"
#include "transgan/objectives.hpp"

using namespace transgan;
using namespace transgan::testing;

namespace acceptance {
namespace {

constexpr int kSeeds = 20;

struct Tally {
  int checks = 0, failures = 0;
  double worst = 0;
  std::string first_failure;

  void add(const std::string& name, const GradcheckResult& r) {
    ++checks;
    worst = std::max(worst, r.worst);
    if (!r.ok && failures++ == 0) first_failure = name + ": " + r.detail;
  }
};

std::vector<Tensor> leaves_of(const NamedParams& named) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

struct Primitive {
  const char* name;
  Function f;
  std::vector<Shape> shapes;
  double scale = 1.0;
  // Inputs become |x| + offset when positive.
  double offset = 0.0;
};

std::vector<Primitive> primitives() {
  return {
      {"add", [](auto& x) { return add(x[0], x[1]); }, {{3, 4}, {3, 4}}},
      {"sub", [](auto& x) { return sub(x[0], x[1]); }, {{5}, {1}}},
      {"mul", [](auto& x) { return mul(x[0], x[1]); }, {{2, 3}, {2, 3}}},
      {"neg", [](auto& x) { return neg(x[0]); }, {{4}}},
      {"add_scalar", [](auto& x) { return add_scalar(x[0], 0.5); }, {{4}}},
      {"mul_scalar", [](auto& x) { return mul_scalar(x[0], -1.5); }, {{4}}},
      {"expand_scalar", [](auto& x) { return expand_scalar(x[0], {2, 3}); }, {{}}},
      {"exp", [](auto& x) { return exp(x[0]); }, {{6}}},
      {"sqrt", [](auto& x) { return sqrt(x[0]); }, {{6}}, 1.0, 0.5},
      {"square", [](auto& x) { return square(x[0]); }, {{6}}},
      {"safe_reciprocal", [](auto& x) { return safe_reciprocal(x[0]); }, {{6}}, 1.0, 0.5},
      {"tanh", [](auto& x) { return tanh(x[0]); }, {{6}}},
      {"relu", [](auto& x) { return relu(x[0]); }, {{6}}, 1.0, 0.1},
      {"gelu", [](auto& x) { return gelu(x[0]); }, {{8}}, 2.0},
      {"gelu'", [](auto& x) { return gelu_derivative(x[0], 1); }, {{8}}, 2.0},
      {"gelu''", [](auto& x) { return gelu_derivative(x[0], 2); }, {{8}}, 2.0},
      {"gelu'''", [](auto& x) { return gelu_derivative(x[0], 3); }, {{8}}, 2.0},
      {"sum", [](auto& x) { return sum(x[0]); }, {{2, 3}}},
      {"mean", [](auto& x) { return mean(x[0]); }, {{2, 3}}},
      {"sum_last", [](auto& x) { return sum_last(x[0]); }, {{2, 3, 4}}},
      {"mean_last", [](auto& x) { return mean_last(x[0]); }, {{2, 5}}},
      {"expand_last", [](auto& x) { return expand_last(x[0], 3); }, {{2, 1}}},
      {"sum_leading", [](auto& x) { return sum_leading(x[0]); }, {{2, 3, 4}}},
      {"broadcast_leading", [](auto& x) { return broadcast_leading(x[0], {2, 3, 4}); }, {{4}}},
      {"add_bias", [](auto& x) { return add_bias(x[0], x[1]); }, {{2, 3, 4}, {4}}},
      {"mul_bias", [](auto& x) { return mul_bias(x[0], x[1]); }, {{2, 3, 4}, {4}}},
      {"reshape", [](auto& x) { return reshape(x[0], {6, 2}); }, {{3, 4}}},
      {"permute", [](auto& x) { return permute(x[0], {2, 0, 1}); }, {{2, 3, 4}}},
      {"transpose_last2", [](auto& x) { return transpose_last2(x[0]); }, {{2, 3, 4}}},
      {"slice", [](auto& x) { return slice(x[0], 1, 1, 2); }, {{2, 4, 3}}},
      {"pad_slice", [](auto& x) { return pad_slice(x[0], 0, 1, 4); }, {{2, 3}}},
      {"concat", [](auto& x) { return concat({x[0], x[1]}, 1); }, {{2, 3}, {2, 2}}},
      {"matmul", [](auto& x) { return matmul(x[0], x[1]); }, {{3, 4}, {4, 2}}},
      {"bmm", [](auto& x) { return bmm(x[0], x[1]); }, {{2, 3, 4}, {2, 4, 5}}},
      {"linear", [](auto& x) { return linear(x[0], x[1], x[2]); }, {{2, 3, 4}, {4, 5}, {5}}},
      {"softmax_last", [](auto& x) { return softmax_last(x[0]); }, {{3, 5}}, 2.0},
      {"layernorm", [](auto& x) { return layernorm(x[0], x[1], x[2]); }, {{2, 3, 6}, {6}, {6}}},
      {"translate", [](auto& x) { return translate(x[0], {{1, -2}, {0, 3}}); }, {{2, 4, 5, 3}}},
      {"attention", [](auto& x) { return attention(x[0], x[1], x[2]); }, {{2, 9, 3}, {2, 9, 3}, {2, 9, 3}}},
      {"attention_masked",
       [](auto& x) {
         const AttentionMask m{AttentionWindow::of(2), 3};
         return attention(x[0], x[1], x[2], &m);
       },
       {{2, 9, 3}, {2, 9, 3}, {2, 9, 3}}},
      {"pixelshuffle", [](auto& x) { return pixelshuffle_upsample({x[0], 2, 0}).tokens; }, {{2, 4, 8}}},
      {"augmentation",
       [](auto& x) {
         Rng rng(7);
         return apply_augmentation(x[0], sample_augmentation(2, 4, AugmentProbs{1, 0.5, 1}, rng));
       },
       {{2, 4, 4, 3}}},
      {"positional_embedding", [](auto& x) { return positional_embedding_add(x[0], x[1]); },
       {{2, 4, 3}, {4, 3}}},
  };
}

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

}  // namespace

Outcome gradient_suite() {
  const auto start = std::chrono::steady_clock::now();
  Tally primitive_tally, composite_tally;
  const auto prims = primitives();
  for (int seed = 0; seed < kSeeds; ++seed) {
    for (const auto& p : prims) {
      Rng rng(static_cast<std::uint64_t>(seed) * 7919 + 1);
      std::vector<Tensor> inputs;
      for (const auto& s : p.shapes) {
        Tensor t = random_tensor(s, rng, p.scale);
        if (p.offset != 0.0)
          for (auto& v : t.mutable_data()) v = std::abs(v) + p.offset;
        inputs.push_back(t);
      }
      primitive_tally.add(p.name, gradcheck(p.f, inputs, 1e-4, static_cast<std::uint64_t>(seed)));
    }

    Rng rng(static_cast<std::uint64_t>(seed) + 1000);
    {
      EncoderBlockParams block = init_encoder_block(4, 2, 2, rng);
      NamedParams named;
      collect(block, "b", named);
      auto leaves = leaves_of(named);
      scramble(leaves, rng, 0.4);
      Tensor x = random_tensor({2, 4, 4}, rng);
      leaves.push_back(x);
      const AttentionMask mask{AttentionWindow::of(1 + seed % 2), 2};
      const Tensor w = random_tensor({2, 4, 4}, rng, 1.0, false);
      composite_tally.add("encoder_block", gradcheck_leaves(
          [&] { return sum(mul(encoder_block(x, block, &mask), w)); }, leaves, 1e-3));
    }
    {
      const auto config = mini_generator();
      GeneratorParams g = init_generator(config, rng);
      auto leaves = leaves_of(generator_parameters(g));
      scramble(leaves, rng, 0.3);
      Tensor z = random_tensor({2, 3}, rng);
      leaves.push_back(z);
      const Tensor w = random_tensor({2, 4, 4, 3}, rng, 1.0, false);
      const auto window = seed % 2 ? AttentionWindow::of(1) : AttentionWindow::unbounded();
      composite_tally.add("generator", gradcheck_leaves(
          [&] { return sum(mul(generate(z, g, config, window), w)); }, leaves, 1e-3));
    }
    {
      const auto config = mini_generator();
      GeneratorParams g = init_generator(config, rng);
      auto leaves = leaves_of(generator_parameters(g));
      scramble(leaves, rng, 0.3);
      const Tensor lr = random_tensor({2, 2, 2, 3}, rng, 0.5, false);
      const Tensor w = random_tensor({2, 4, 4, 3}, rng, 1.0, false);
      composite_tally.add("super_resolve", gradcheck_leaves(
          [&] { return sum(mul(super_resolve(lr, g, config), w)); }, leaves, 1e-3));
    }
    {
      const auto config = mini_discriminator();
      DiscriminatorParams d = init_discriminator(config, rng);
      auto leaves = leaves_of(discriminator_parameters(d));
      scramble(leaves, rng, 0.3);
      Tensor images = random_tensor({2, 4, 4, 3}, rng);
      leaves.push_back(images);
      const Tensor w = random_tensor({2}, rng, 1.0, false);
      composite_tally.add("discriminator", gradcheck_leaves(
          [&] { return sum(mul(discriminate(images, d, config), w)); }, leaves, 1e-3));
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream s;
  s << prims.size() << " primitives + block/G/SR/D over " << kSeeds << " seeds, "
    << primitive_tally.checks + composite_tally.checks << " checks, "
    << primitive_tally.failures + composite_tally.failures << " failed, "
    << "worst err/tol " << std::max(primitive_tally.worst, composite_tally.worst) << ", "
    << seconds << " s";
  if (!primitive_tally.first_failure.empty()) s << "; " << primitive_tally.first_failure;
  if (!composite_tally.first_failure.empty()) s << "; " << composite_tally.first_failure;
  return {primitive_tally.failures == 0 && composite_tally.failures == 0 && seconds < 120, s.str()};
}

Outcome double_backprop() {
  Tally tally;
  constexpr std::size_t pixels = 12;
  auto flat = [](const Tensor& x) { return reshape(x, Shape{x.dim(0), pixels}); };
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed) + 1);
    Tensor w1 = random_tensor({pixels, 3}, rng, 0.5), b1 = random_tensor({3}, rng, 0.5),
           w2 = random_tensor({3, 1}, rng, 0.5);
    const Critic critic = [&](const Tensor& x) {
      return reshape(matmul(gelu(linear(flat(x), w1, b1)), w2), Shape{x.dim(0)});
    };
    const Tensor real = random_tensor({3, 2, 2, 3}, rng, 1.0, false);
    const Tensor fake = random_tensor({3, 2, 2, 3}, rng, 1.0, false);
    const std::vector<Real> eps{Real(rng.uniform()), Real(rng.uniform()), Real(rng.uniform())};
    tally.add("toy critic", gradcheck_leaves(
        [&] { return d_loss_wgan_gp(real, fake, critic, eps).total; }, {w1, b1, w2}, 1e-3));
  }

  std::vector<Real> wv(pixels, 0);
  wv[0] = 0.5, wv[1] = -0.5, wv[2] = 0.5, wv[3] = -0.5;
  const Tensor unit(Shape{pixels, 1}, wv);
  const Critic linear_critic = [&](const Tensor& x) {
    return reshape(matmul(flat(x), unit), Shape{x.dim(0)});
  };
  const Tensor c(Shape{}, {0.3}, true);
  const Critic constant_critic = [&](const Tensor& x) {
    return add(mul_scalar(reshape(sum_last(flat(x)), Shape{x.dim(0)}), 0), expand_scalar(c, {x.dim(0)}));
  };
  Rng rng(99);
  const Tensor real = random_tensor({4, 2, 2, 3}, rng, 1.0, false);
  const Tensor fake = random_tensor({4, 2, 2, 3}, rng, 1.0, false);
  const double linear_penalty = d_loss_wgan_gp(real, fake, linear_critic, rng).penalty.item();
  const double constant_total = d_loss_wgan_gp(real, fake, constant_critic, rng, 10).total.item();

  std::ostringstream s;
  s << tally.checks << " toy-critic checks, " << tally.failures << " failed, worst err/tol "
    << tally.worst << "; unit-norm linear penalty " << linear_penalty
    << ", constant critic loss " << constant_total;
  if (!tally.first_failure.empty()) s << "; " << tally.first_failure;
  return {tally.failures == 0 && linear_penalty == 0 && constant_total == 10, s.str()};
}

Outcome metric_correctness() {
  Rng rng(2024);
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    const double m1 = rng.uniform(-5, 5), m2 = rng.uniform(-5, 5);
    const double v1 = rng.uniform(0.01, 4), v2 = rng.uniform(0.01, 4);
    const double expected = (m1 - m2) * (m1 - m2) + v1 + v2 - 2 * std::sqrt(v1 * v2);
    const double got = frechet_distance({{m1}, {v1}, 100}, {{m2}, {v2}, 100});
    worst = std::max(worst, std::abs(got - expected));
  }
  FeatureMoments m;
  const std::size_t d = 8;
  std::vector<double> a(d * d);
  for (auto& v : a) v = rng.normal();
  m.mean.resize(d);
  for (auto& v : m.mean) v = rng.normal();
  m.covariance.assign(d * d, 0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) m.covariance[i * d + j] += a[i * d + k] * a[j * d + k];
  m.count = 100;
  const double self = frechet_distance(m, m);
  std::ostringstream s;
  s << "10 one-dimensional pairs, max |error| " << worst << "; identical moments " << self;
  return {worst <= 1e-8 && self == 0, s.str()};
}

}  // namespace acceptance
