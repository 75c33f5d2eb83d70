// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "transgan/attention.hpp"
#include "transgan/rng.hpp"
#include "transgan/tensor.hpp"

TRANSGAN_BEGIN_NAMESPACE

/// Ordered (name, tensor) list. Tensors are shared handles, so writing through
/// an entry updates the owning parameter struct.
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

inline constexpr double kInitStddev = 0.02;

struct LinearParams {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
};

struct AttentionParams {
  LinearParams query, key, value, proj;
  std::size_t heads = 4;
};

/// Pre-LN transformer encoder block: attention and a GELU MLP, each wrapped
/// in a residual connection.
struct EncoderBlockParams {
  LayerNormParams norm1;
  AttentionParams attn;
  LayerNormParams norm2;
  LinearParams fc1;  // [C, r*C]
  LinearParams fc2;  // [r*C, C]

  std::size_t dim() const { return norm1.gamma.dim(0); }
};

/// Tokens of a square feature map: [B, side*side, C] in row-major grid order.
struct TokenGrid {
  Tensor tokens;
  std::size_t side = 0;
  std::size_t stage = 0;

  std::size_t batch() const { return tokens.dim(0); }
  std::size_t count() const { return tokens.dim(1); }
  std::size_t dim() const { return tokens.dim(2); }
};

Tensor truncated_normal(const Shape& shape, double stddev, Rng& rng);
LinearParams init_linear(std::size_t in, std::size_t out, Rng& rng);
LayerNormParams init_layernorm(std::size_t dim);
EncoderBlockParams init_encoder_block(std::size_t dim, std::size_t heads, std::size_t mlp_ratio,
                                      Rng& rng);

void collect(const LinearParams& p, const std::string& prefix, NamedParams& out);
void collect(const LayerNormParams& p, const std::string& prefix, NamedParams& out);
void collect(const EncoderBlockParams& p, const std::string& prefix, NamedParams& out);

/// Trainable scalars in one encoder block of width `dim`.
std::size_t encoder_block_param_count(std::size_t dim, std::size_t mlp_ratio);

/// x: [N, C] or [B, N, C]. Heads split C evenly; `mask` (optional) must cover
/// exactly N tokens.
Tensor multi_head_self_attention(const Tensor& x, const AttentionParams& params,
                                 const AttentionMask* mask = nullptr);

Tensor encoder_block(const Tensor& x, const EncoderBlockParams& params,
                     const AttentionMask* mask = nullptr);

/// (side x side) x C -> (2 side x 2 side) x C/4 with
/// out(y, x, c) = in(y/2, x/2, 4c + 2(y mod 2) + (x mod 2)).
TokenGrid pixelshuffle_upsample(const TokenGrid& grid);

/// x: [N, C] or [B, N, C]; table: [N, C].
Tensor positional_embedding_add(const Tensor& x, const Tensor& table);

TRANSGAN_END_NAMESPACE
