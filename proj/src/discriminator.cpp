// SPDX-License-Identifier: Apache-2.0
#include "transgan/discriminator.hpp"

#include <numeric>
#include <string>

#include "transgan/ops.hpp"

TRANSGAN_BEGIN_NAMESPACE

void DiscriminatorConfig::validate() const {
  if (patch_grid == 0) throw ConfigError("patch_grid: must be positive");
  if (input_resolution == 0 || input_resolution % patch_grid != 0)
    throw ConfigError("input_resolution: " + std::to_string(input_resolution) +
                      " is not divisible by the patch grid " + std::to_string(patch_grid));
  if (embed_dim == 0) throw ConfigError("d_embed_dim: must be positive");
  if (depth == 0) throw ConfigError("d_depth: must be positive");
  if (head_count == 0 || embed_dim % head_count != 0)
    throw ConfigError("d_heads: " + std::to_string(head_count) + " does not divide embed dim " +
                      std::to_string(embed_dim));
  if (mlp_ratio == 0) throw ConfigError("mlp_ratio: must be positive");
}

DiscriminatorConfig DiscriminatorConfig::preset(std::string_view name) {
  DiscriminatorConfig c;
  if (name == "tiny") {
    c.embed_dim = 32;
    c.depth = 2;
  } else if (name != "transgan-s" && name != "transgan-m" && name != "transgan-l" &&
             name != "transgan-xl") {
    throw ConfigError("preset: unknown preset '" + std::string(name) + "'");
  }
  return c;
}

DiscriminatorParams init_discriminator(const DiscriminatorConfig& config, Rng& rng) {
  config.validate();
  const auto c = config.embed_dim, p = config.patch_size();
  DiscriminatorParams d;
  d.patch_embed = init_linear(3 * p * p, c, rng);
  d.cls = truncated_normal(Shape{1, c}, kInitStddev, rng);
  d.pos = truncated_normal(Shape{config.sequence_length(), c}, kInitStddev, rng);
  for (std::size_t i = 0; i < config.depth; ++i)
    d.blocks.push_back(init_encoder_block(c, config.head_count, config.mlp_ratio, rng));
  d.head = init_linear(c, 1, rng);
  return d;
}

NamedParams discriminator_parameters(const DiscriminatorParams& params) {
  NamedParams out;
  collect(params.patch_embed, "D.patch_embed", out);
  out.emplace_back("D.cls", params.cls);
  out.emplace_back("D.pos", params.pos);
  for (std::size_t i = 0; i < params.blocks.size(); ++i)
    collect(params.blocks[i], "D.block" + std::to_string(i), out);
  collect(params.head, "D.head", out);
  return out;
}

std::size_t parameter_count(const DiscriminatorConfig& config) {
  config.validate();
  const auto c = config.embed_dim, p = config.patch_size();
  return (3 * p * p * c + c) + c + config.sequence_length() * c +
         config.depth * encoder_block_param_count(c, config.mlp_ratio) + (c + 1);
}

Tensor patchify(const Tensor& images, std::size_t patch) {
  if (images.rank() == 3) {
    Tensor batched = reshape(images, Shape{1, images.dim(0), images.dim(1), images.dim(2)});
    Tensor t = patchify(batched, patch);
    return reshape(t, Shape{t.dim(1), t.dim(2)});
  }
  if (images.rank() != 4 || images.dim(3) != 3)
    throw DimensionError("patchify: expected [B,H,W,3], got " + shape_to_string(images.shape()));
  const auto b = images.dim(0), h = images.dim(1), w = images.dim(2);
  if (patch == 0 || h != w || h % patch != 0)
    throw DimensionError("patchify: " + std::to_string(h) + "x" + std::to_string(w) +
                         " image is not divisible into patches of side " + std::to_string(patch));
  const auto g = h / patch;
  Tensor t = reshape(images, Shape{b, g, patch, g, patch, 3});
  // (b, gy, py, gx, px, c) -> (b, gy, gx, py, px, c)
  t = permute(t, {0, 1, 3, 2, 4, 5});
  return reshape(t, Shape{b, g * g, patch * patch * 3});
}

Tensor discriminate(const Tensor& images, const DiscriminatorParams& params,
                    const DiscriminatorConfig& config, ShapeTrace* trace) {
  const bool single = images.rank() == 3;
  Tensor batch = single ? reshape(images, Shape{1, images.dim(0), images.dim(1), images.dim(2)})
                        : images;
  const auto res = config.input_resolution;
  if (batch.rank() != 4 || batch.dim(1) != res || batch.dim(2) != res || batch.dim(3) != 3)
    throw DimensionError("discriminate: expected " + std::to_string(res) + "x" +
                         std::to_string(res) + "x3 images, got " + shape_to_string(images.shape()));
  if (res % config.patch_grid != 0)
    throw DimensionError("discriminate: resolution " + std::to_string(res) +
                         " is not divisible by " + std::to_string(config.patch_grid));
  const auto b = batch.dim(0), c = config.embed_dim;

  Tensor tokens = linear(patchify(batch, config.patch_size()), params.patch_embed.weight,
                         params.patch_embed.bias);
  Tensor cls = reshape(broadcast_leading(reshape(params.cls, Shape{c}), Shape{b, c}), Shape{b, 1, c});
  tokens = concat({cls, tokens}, 1);
  tokens = positional_embedding_add(tokens, params.pos);
  if (trace) trace->emplace_back("embed", Shape{tokens.dim(1), tokens.dim(2)});
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    tokens = encoder_block(tokens, params.blocks[i]);
    if (trace) trace->emplace_back("block" + std::to_string(i), Shape{tokens.dim(1), tokens.dim(2)});
  }
  Tensor cls_out = reshape(slice(tokens, 1, 0, 1), Shape{b, c});
  if (trace) trace->emplace_back("cls", Shape{1, c});
  Tensor scores = reshape(linear(cls_out, params.head.weight, params.head.bias), Shape{b});
  if (trace) trace->emplace_back("head", Shape{1});
  return single ? reshape(scores, Shape{}) : scores;
}

TRANSGAN_END_NAMESPACE
