// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "transgan/attention.hpp"
#include "transgan/nn.hpp"

TRANSGAN_BEGIN_NAMESPACE

/// A configuration value violates an invariant. The message names the key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Layer-by-layer output shapes (per image, batch axis dropped).
using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

/// Multi-stage generator layout. Stage s runs at side initial_grid * 2^s with
/// width initial_dim / 4^s; every stage but the last is followed by a
/// pixelshuffle upsample.
struct GeneratorConfig {
  std::size_t initial_grid = 8;
  std::size_t initial_dim = 384;
  std::vector<std::size_t> stage_depths{5, 2, 2};
  std::size_t target_resolution = 32;
  std::size_t latent_dim = 384;
  std::size_t mlp_ratio = 4;
  std::size_t head_count = 4;

  std::size_t stages() const { return stage_depths.size(); }
  std::size_t stage_side(std::size_t s) const { return initial_grid << s; }
  std::size_t stage_dim(std::size_t s) const { return initial_dim >> (2 * s); }
  std::size_t stage_tokens(std::size_t s) const { return stage_side(s) * stage_side(s); }
  /// Heads used at width `dim`: the configured count, reduced to a common
  /// divisor when a narrow late stage cannot be split evenly.
  std::size_t heads_for_dim(std::size_t dim) const;

  void validate() const;

  /// transgan-s / transgan-m / transgan-l / transgan-xl / tiny, all at the
  /// 32x32 CIFAR layout.
  static GeneratorConfig preset(std::string_view name);
  /// Re-targets a preset: "cifar" (8 -> 32), "stl" (12 -> 48), "celeba"
  /// (four stages {5,3,3,2}, 8 -> 64).
  GeneratorConfig with_variant(std::string_view variant) const;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct GeneratorParams {
  LinearParams input_mlp;  // latent -> H*W*C
  LinearParams lr_embed;   // 3 -> C, per low-resolution pixel
  std::vector<Tensor> pos;  // stage s: [N_s, C_s]
  std::vector<std::vector<EncoderBlockParams>> blocks;
  LinearParams to_rgb;  // C_last -> 3
};

GeneratorParams init_generator(const GeneratorConfig& config, Rng& rng);
NamedParams generator_parameters(const GeneratorParams& params);
std::size_t parameter_count(const GeneratorConfig& config);

/// z: [latent] or [B, latent] -> image [H_T, H_T, 3] or [B, H_T, H_T, 3],
/// values in [-1, 1]. `window` bounds attention in every stage whose grid
/// side exceeds it.
Tensor generate(const Tensor& z, const GeneratorParams& params, const GeneratorConfig& config,
                AttentionWindow window = AttentionWindow::unbounded(), ShapeTrace* trace = nullptr);

/// lr: [H, H, 3] or [B, H, H, 3] with H = initial_grid. The low-resolution
/// pixels are embedded per position in place of the noise MLP; all
/// transformer stages are shared with `generate`.
Tensor super_resolve(const Tensor& lr, const GeneratorParams& params, const GeneratorConfig& config,
                     AttentionWindow window = AttentionWindow::unbounded(),
                     ShapeTrace* trace = nullptr);

/// Box-filter downsampling of [B, H, W, C] images by an integer factor.
Tensor downsample_average(const Tensor& images, std::size_t factor);

TRANSGAN_END_NAMESPACE
