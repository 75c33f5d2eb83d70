// SPDX-License-Identifier: Apache-2.0
#include "transgan/nn.hpp"

#include "transgan/ops.hpp"

TRANSGAN_BEGIN_NAMESPACE

Tensor truncated_normal(const Shape& shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(shape, true);
  for (auto& v : t.mutable_data()) v = static_cast<Real>(rng.truncated_normal(stddev));
  return t;
}

LinearParams init_linear(std::size_t in, std::size_t out, Rng& rng) {
  return {truncated_normal(Shape{in, out}, kInitStddev, rng), Tensor::zeros(Shape{out}, true)};
}

LayerNormParams init_layernorm(std::size_t dim) {
  return {Tensor::ones(Shape{dim}, true), Tensor::zeros(Shape{dim}, true)};
}

EncoderBlockParams init_encoder_block(std::size_t dim, std::size_t heads, std::size_t mlp_ratio,
                                      Rng& rng) {
  if (heads == 0 || dim % heads != 0)
    throw std::invalid_argument("embedding dim " + std::to_string(dim) +
                                " is not divisible by head count " + std::to_string(heads));
  EncoderBlockParams p;
  p.norm1 = init_layernorm(dim);
  p.attn.heads = heads;
  p.attn.query = init_linear(dim, dim, rng);
  p.attn.key = init_linear(dim, dim, rng);
  p.attn.value = init_linear(dim, dim, rng);
  p.attn.proj = init_linear(dim, dim, rng);
  p.norm2 = init_layernorm(dim);
  p.fc1 = init_linear(dim, mlp_ratio * dim, rng);
  p.fc2 = init_linear(mlp_ratio * dim, dim, rng);
  return p;
}

void collect(const LinearParams& p, const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".weight", p.weight);
  out.emplace_back(prefix + ".bias", p.bias);
}

void collect(const LayerNormParams& p, const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".gamma", p.gamma);
  out.emplace_back(prefix + ".beta", p.beta);
}

void collect(const EncoderBlockParams& p, const std::string& prefix, NamedParams& out) {
  collect(p.norm1, prefix + ".norm1", out);
  collect(p.attn.query, prefix + ".attn.query", out);
  collect(p.attn.key, prefix + ".attn.key", out);
  collect(p.attn.value, prefix + ".attn.value", out);
  collect(p.attn.proj, prefix + ".attn.proj", out);
  collect(p.norm2, prefix + ".norm2", out);
  collect(p.fc1, prefix + ".fc1", out);
  collect(p.fc2, prefix + ".fc2", out);
}

std::size_t encoder_block_param_count(std::size_t dim, std::size_t mlp_ratio) {
  const std::size_t hidden = mlp_ratio * dim;
  return 4 * dim                      // two layer norms
         + 4 * (dim * dim + dim)      // q, k, v, out projections
         + (dim * hidden + hidden)    // fc1
         + (hidden * dim + dim);      // fc2
}

namespace {

// [B, N, C] -> [B*h, N, C/h]
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const auto b = x.dim(0), n = x.dim(1), c = x.dim(2);
  Tensor t = reshape(x, Shape{b, n, heads, c / heads});
  t = permute(t, {0, 2, 1, 3});
  return reshape(t, Shape{b * heads, n, c / heads});
}

Tensor merge_heads(const Tensor& x, std::size_t batch) {
  const auto heads = x.dim(0) / batch, n = x.dim(1), d = x.dim(2);
  Tensor t = reshape(x, Shape{batch, heads, n, d});
  t = permute(t, {0, 2, 1, 3});
  return reshape(t, Shape{batch, n, heads * d});
}

}  // namespace

Tensor multi_head_self_attention(const Tensor& x, const AttentionParams& params,
                                 const AttentionMask* mask) {
  if (x.rank() == 2) {
    Tensor batched = reshape(x, Shape{1, x.dim(0), x.dim(1)});
    return reshape(multi_head_self_attention(batched, params, mask), x.shape());
  }
  if (x.rank() != 3) throw DimensionError("attention input must be [N,C] or [B,N,C], got " +
                                          shape_to_string(x.shape()));
  const auto batch = x.dim(0), n = x.dim(1), c = x.dim(2);
  if (params.heads == 0 || c % params.heads != 0)
    throw DimensionError("embedding dim " + std::to_string(c) + " is not divisible by " +
                         std::to_string(params.heads) + " heads");
  if (mask && mask->tokens() != n)
    throw DimensionError("attention mask covers " + std::to_string(mask->tokens()) +
                         " tokens but the sequence has " + std::to_string(n));

  Tensor q = split_heads(linear(x, params.query.weight, params.query.bias), params.heads);
  Tensor k = split_heads(linear(x, params.key.weight, params.key.bias), params.heads);
  Tensor v = split_heads(linear(x, params.value.weight, params.value.bias), params.heads);
  Tensor o = merge_heads(attention(q, k, v, mask), batch);
  return linear(o, params.proj.weight, params.proj.bias);
}

Tensor encoder_block(const Tensor& x, const EncoderBlockParams& params, const AttentionMask* mask) {
  Tensor h = layernorm(x, params.norm1.gamma, params.norm1.beta);
  Tensor y = add(x, multi_head_self_attention(h, params.attn, mask));
  Tensor m = layernorm(y, params.norm2.gamma, params.norm2.beta);
  m = linear(gelu(linear(m, params.fc1.weight, params.fc1.bias)), params.fc2.weight, params.fc2.bias);
  return add(y, m);
}

TokenGrid pixelshuffle_upsample(const TokenGrid& grid) {
  const Tensor& t = grid.tokens;
  if (t.rank() != 3) throw DimensionError("pixelshuffle expects [B,N,C] tokens");
  const auto b = t.dim(0), n = t.dim(1), c = t.dim(2), s = grid.side;
  if (s * s != n)
    throw DimensionError("pixelshuffle: " + std::to_string(n) + " tokens do not form a " +
                         std::to_string(s) + "x" + std::to_string(s) + " grid");
  if (c % 4 != 0)
    throw DimensionError("pixelshuffle: channel count " + std::to_string(c) +
                         " is not divisible by 4");
  Tensor r = reshape(t, Shape{b, s, s, c / 4, 2, 2});
  // (b, i, j, c, dy, dx) -> (b, i, dy, j, dx, c)
  r = permute(r, {0, 1, 4, 2, 5, 3});
  return {reshape(r, Shape{b, 4 * n, c / 4}), 2 * s, grid.stage + 1};
}

Tensor positional_embedding_add(const Tensor& x, const Tensor& table) {
  const auto n = x.rank() >= 2 ? x.dim(x.rank() - 2) : 0;
  const auto c = x.rank() >= 2 ? x.dim(x.rank() - 1) : 0;
  if (table.shape() != Shape{n, c})
    throw DimensionError("positional table " + shape_to_string(table.shape()) +
                         " does not match tokens " + shape_to_string(x.shape()));
  const auto rows = x.numel() / (n * c);
  Tensor flat = reshape(x, Shape{rows, n * c});
  return reshape(add_bias(flat, reshape(table, Shape{n * c})), x.shape());
}

TRANSGAN_END_NAMESPACE
