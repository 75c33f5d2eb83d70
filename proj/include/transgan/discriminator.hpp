// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "transgan/generator.hpp"
#include "transgan/nn.hpp"

TRANSGAN_BEGIN_NAMESPACE

/// Patch-token critic. Images are cut into patch_grid x patch_grid patches of
/// side input_resolution / patch_grid; a [cls] token is prepended.
struct DiscriminatorConfig {
  std::size_t patch_grid = 8;
  std::size_t embed_dim = 384;
  std::size_t depth = 7;
  std::size_t head_count = 4;
  std::size_t mlp_ratio = 4;
  std::size_t input_resolution = 32;

  std::size_t patch_size() const { return input_resolution / patch_grid; }
  std::size_t sequence_length() const { return patch_grid * patch_grid + 1; }
  void validate() const;

  /// Full-size critic ("transgan-*") or the desk-scale "tiny" critic.
  static DiscriminatorConfig preset(std::string_view name);

  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

struct DiscriminatorParams {
  LinearParams patch_embed;  // 3 p^2 -> C
  Tensor cls;                // [1, C]
  Tensor pos;                // [patch_grid^2 + 1, C]
  std::vector<EncoderBlockParams> blocks;
  LinearParams head;  // C -> 1
};

DiscriminatorParams init_discriminator(const DiscriminatorConfig& config, Rng& rng);
NamedParams discriminator_parameters(const DiscriminatorParams& params);
std::size_t parameter_count(const DiscriminatorConfig& config);

/// [H, W, 3] -> [G^2, 3 p^2] or [B, H, W, 3] -> [B, G^2, 3 p^2], where G is
/// the patch grid. Patches are ordered row-major over the grid; each patch is
/// flattened as (row, col, channel).
Tensor patchify(const Tensor& images, std::size_t patch);

/// Raw critic scores: [H, W, 3] -> rank-0, [B, H, W, 3] -> [B].
Tensor discriminate(const Tensor& images, const DiscriminatorParams& params,
                    const DiscriminatorConfig& config, ShapeTrace* trace = nullptr);

TRANSGAN_END_NAMESPACE
