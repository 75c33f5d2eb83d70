// SPDX-License-Identifier: Apache-2.0
#include "transgan/generator.hpp"

#include <numeric>

#include "transgan/ops.hpp"

TRANSGAN_BEGIN_NAMESPACE

std::size_t GeneratorConfig::heads_for_dim(std::size_t dim) const {
  return std::gcd(head_count, dim);
}

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError(key + ": " + what);
  };
  if (initial_grid == 0) fail("initial_grid", "must be positive");
  if (stage_depths.empty()) fail("stage_depths", "need at least one stage");
  for (auto d : stage_depths)
    if (d == 0) fail("stage_depths", "every stage needs at least one encoder block");
  if (stage_side(stages() - 1) != target_resolution)
    fail("target_resolution", std::to_string(target_resolution) + " != initial_grid " +
                                  std::to_string(initial_grid) + " * 2^" +
                                  std::to_string(stages() - 1));
  const std::size_t divisor = std::size_t{1} << (2 * (stages() - 1));
  if (initial_dim == 0 || initial_dim % divisor != 0)
    fail("initial_dim", std::to_string(initial_dim) + " is not divisible by 4^" +
                            std::to_string(stages() - 1));
  if (latent_dim == 0) fail("latent_dim", "must be positive");
  if (mlp_ratio == 0) fail("mlp_ratio", "must be positive");
  if (head_count == 0) fail("head_count", "must be positive");
}

GeneratorConfig GeneratorConfig::preset(std::string_view name) {
  GeneratorConfig c;
  if (name == "transgan-s") {
    c.initial_dim = 384;
  } else if (name == "transgan-m") {
    c.initial_dim = 512;
  } else if (name == "transgan-l") {
    c.initial_dim = 768;
  } else if (name == "transgan-xl") {
    c.initial_dim = 1024;
    c.stage_depths = {5, 4, 2};
  } else if (name == "tiny") {
    c.initial_dim = 64;
    c.stage_depths = {2, 1, 1};
  } else {
    throw ConfigError("preset: unknown preset '" + std::string(name) + "'");
  }
  c.latent_dim = c.initial_dim;
  return c;
}

GeneratorConfig GeneratorConfig::with_variant(std::string_view variant) const {
  GeneratorConfig c = *this;
  if (variant == "cifar") {
    c.initial_grid = 8;
    c.target_resolution = c.stage_side(c.stages() - 1);
  } else if (variant == "stl") {
    c.initial_grid = 12;
    c.target_resolution = c.stage_side(c.stages() - 1);
  } else if (variant == "celeba") {
    c.initial_grid = 8;
    c.stage_depths = {5, 3, 3, 2};
    c.target_resolution = 64;
  } else {
    throw ConfigError("variant: unknown variant '" + std::string(variant) + "'");
  }
  return c;
}

GeneratorParams init_generator(const GeneratorConfig& config, Rng& rng) {
  config.validate();
  GeneratorParams p;
  const auto c0 = config.initial_dim;
  p.input_mlp = init_linear(config.latent_dim, config.stage_tokens(0) * c0, rng);
  p.lr_embed = init_linear(3, c0, rng);
  for (std::size_t s = 0; s < config.stages(); ++s) {
    const auto dim = config.stage_dim(s);
    p.pos.push_back(truncated_normal(Shape{config.stage_tokens(s), dim}, kInitStddev, rng));
    std::vector<EncoderBlockParams> blocks;
    for (std::size_t b = 0; b < config.stage_depths[s]; ++b)
      blocks.push_back(init_encoder_block(dim, config.heads_for_dim(dim), config.mlp_ratio, rng));
    p.blocks.push_back(std::move(blocks));
  }
  p.to_rgb = init_linear(config.stage_dim(config.stages() - 1), 3, rng);
  return p;
}

NamedParams generator_parameters(const GeneratorParams& params) {
  NamedParams out;
  collect(params.input_mlp, "G.input_mlp", out);
  collect(params.lr_embed, "G.lr_embed", out);
  for (std::size_t s = 0; s < params.pos.size(); ++s) {
    const auto stage = "G.stage" + std::to_string(s);
    out.emplace_back(stage + ".pos", params.pos[s]);
    for (std::size_t b = 0; b < params.blocks[s].size(); ++b)
      collect(params.blocks[s][b], stage + ".block" + std::to_string(b), out);
  }
  collect(params.to_rgb, "G.to_rgb", out);
  return out;
}

std::size_t parameter_count(const GeneratorConfig& config) {
  config.validate();
  const auto c0 = config.initial_dim;
  std::size_t total = config.latent_dim * config.stage_tokens(0) * c0 + config.stage_tokens(0) * c0;
  total += 3 * c0 + c0;
  for (std::size_t s = 0; s < config.stages(); ++s) {
    const auto dim = config.stage_dim(s);
    total += config.stage_tokens(s) * dim;
    total += config.stage_depths[s] * encoder_block_param_count(dim, config.mlp_ratio);
  }
  const auto last = config.stage_dim(config.stages() - 1);
  return total + last * 3 + 3;
}

namespace {

Shape per_image(const Tensor& t) { return Shape(t.shape().begin() + 1, t.shape().end()); }

Tensor run_stages(TokenGrid grid, const GeneratorParams& params, const GeneratorConfig& config,
                  AttentionWindow window, ShapeTrace* trace) {
  for (std::size_t s = 0; s < config.stages(); ++s) {
    const auto stage = "stage" + std::to_string(s);
    if (s > 0) {
      grid = pixelshuffle_upsample(grid);
      if (trace) trace->emplace_back(stage + ".pixelshuffle", per_image(grid.tokens));
    }
    grid.tokens = positional_embedding_add(grid.tokens, params.pos[s]);
    const AttentionMask mask{window, grid.side};
    const AttentionMask* active = mask.allows_all() ? nullptr : &mask;
    for (std::size_t b = 0; b < params.blocks[s].size(); ++b) {
      grid.tokens = encoder_block(grid.tokens, params.blocks[s][b], active);
      if (trace) trace->emplace_back(stage + ".block" + std::to_string(b), per_image(grid.tokens));
    }
  }
  const auto batch = grid.batch(), side = grid.side;
  Tensor rgb = linear(grid.tokens, params.to_rgb.weight, params.to_rgb.bias);
  Tensor image = reshape(tanh(rgb), Shape{batch, side, side, 3});
  if (trace) trace->emplace_back("to_rgb", per_image(image));
  return image;
}

}  // namespace

Tensor generate(const Tensor& z, const GeneratorParams& params, const GeneratorConfig& config,
                AttentionWindow window, ShapeTrace* trace) {
  const bool single = z.rank() == 1;
  Tensor batch = single ? reshape(z, Shape{1, z.dim(0)}) : z;
  if (batch.rank() != 2 || batch.dim(1) != config.latent_dim)
    throw DimensionError("generate: expected latent of width " + std::to_string(config.latent_dim) +
                         ", got " + shape_to_string(z.shape()));
  const auto b = batch.dim(0), side = config.initial_grid, dim = config.initial_dim;
  Tensor x = linear(batch, params.input_mlp.weight, params.input_mlp.bias);
  x = reshape(x, Shape{b, side * side, dim});
  if (trace) trace->emplace_back("input_mlp", per_image(x));
  Tensor image = run_stages({x, side, 0}, params, config, window, trace);
  return single ? reshape(image, per_image(image)) : image;
}

Tensor super_resolve(const Tensor& lr, const GeneratorParams& params, const GeneratorConfig& config,
                     AttentionWindow window, ShapeTrace* trace) {
  const bool single = lr.rank() == 3;
  Tensor batch = single ? reshape(lr, Shape{1, lr.dim(0), lr.dim(1), lr.dim(2)}) : lr;
  const auto side = config.initial_grid;
  if (batch.rank() != 4 || batch.dim(1) != side || batch.dim(2) != side || batch.dim(3) != 3)
    throw DimensionError("super_resolve: low-resolution input must be " + std::to_string(side) +
                         "x" + std::to_string(side) + "x3, got " + shape_to_string(lr.shape()));
  const auto b = batch.dim(0);
  Tensor x = reshape(batch, Shape{b, side * side, 3});
  x = linear(x, params.lr_embed.weight, params.lr_embed.bias);
  if (trace) trace->emplace_back("lr_embed", per_image(x));
  Tensor image = run_stages({x, side, 0}, params, config, window, trace);
  return single ? reshape(image, per_image(image)) : image;
}

Tensor downsample_average(const Tensor& images, std::size_t factor) {
  if (images.rank() != 4 || factor == 0 || images.dim(1) % factor || images.dim(2) % factor)
    throw DimensionError("downsample_average: cannot pool " + shape_to_string(images.shape()) +
                         " by " + std::to_string(factor));
  const auto b = images.dim(0), h = images.dim(1), w = images.dim(2), c = images.dim(3);
  const auto oh = h / factor, ow = w / factor;
  std::vector<Real> out(b * oh * ow * c, 0);
  auto in = images.data();
  const Real inv = Real(1) / static_cast<Real>(factor * factor);
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t k = 0; k < c; ++k)
          out[((n * oh + y / factor) * ow + x / factor) * c + k] += in[((n * h + y) * w + x) * c + k];
  for (auto& v : out) v *= inv;
  return Tensor(Shape{b, oh, ow, c}, std::move(out));
}

TRANSGAN_END_NAMESPACE
