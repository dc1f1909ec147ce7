// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/transformer.hpp"

#include <cmath>
#include <numeric>
#include <vector>

#include "slicefl/errors.hpp"
#include "slicefl/ops.hpp"

namespace slicefl {

Transformer::Transformer(const BaseModel& base, const Adapters& adapters)
    : base_(base), adapters_(adapters) {}

Tensor Transformer::embed(std::span<const std::uint32_t> tokens, Backend& backend) const {
  const TransformerConfig& c = base_.config;
  if (tokens.empty() || tokens.size() > c.max_seq) {
    throw DimensionError("sequence length " + std::to_string(tokens.size()) +
                         " outside [1, " + std::to_string(c.max_seq) + "]");
  }
  std::vector<std::size_t> ids(tokens.begin(), tokens.end());
  for (std::size_t id : ids) {
    if (id >= c.vocab) throw DimensionError("token id " + std::to_string(id) + " outside vocab");
  }
  backend.note("embed", OpClass::Embedding);
  return add(gather_rows(base_.tok_emb, ids), slice_rows(base_.pos_emb, 0, ids.size()));
}

Tensor Transformer::apply_linear(const Tensor& x, std::size_t layer, LinearKind kind,
                                 Backend& backend, Rng* dropout_rng) const {
  const std::string site = site_name(layer, kind);
  const auto key = std::pair{layer, kind};
  if (auto it = adapters_.spf.find(key); it != adapters_.spf.end()) {
    backend.note(site, OpClass::Linear);
    return spf_forward(x, it->second.weight, it->second.bias, it->second.partition);
  }
  const BlockWeights& blk = base_.blocks[layer];
  Tensor y = backend.frozen_linear(site, x, blk.weight(kind), blk.bias(kind));
  if (auto it = adapters_.lora.find(key); it != adapters_.lora.end()) {
    backend.note(site + ".lora", OpClass::Adapter);
    y = add(y, lora_delta(x, it->second, dropout_rng));
  }
  return y;
}

Tensor Transformer::forward_block(const Tensor& x, std::size_t layer, Backend& backend,
                                  Rng* dropout_rng) const {
  const TransformerConfig& c = base_.config;
  if (layer >= c.n_layers) throw DimensionError("layer index out of range");
  if (x.ndim() != 2 || x.cols() != c.d_model) {
    throw DimensionError("block input must be seq x " + std::to_string(c.d_model) + ", got " +
                         shape_str(x.shape()));
  }
  const BlockWeights& blk = base_.blocks[layer];
  const std::size_t seq = x.rows(), heads = c.n_heads, dh = c.d_head;

  backend.note(site_name(layer, "ln1"), OpClass::LayerNorm);
  const Tensor h = layernorm(x, blk.ln1_gamma, blk.ln1_beta);
  const Tensor qkv = apply_linear(h, layer, LinearKind::Qkv, backend, dropout_rng);

  std::vector<Tensor> qs, ks, vs;
  for (std::size_t g = 0; g < heads; ++g) {
    const std::size_t base = g * 3 * dh;
    qs.push_back(slice_cols(qkv, base, base + dh));
    ks.push_back(slice_cols(qkv, base + dh, base + 2 * dh));
    vs.push_back(slice_cols(qkv, base + 2 * dh, base + 3 * dh));
  }
  const Tensor q = concat_cols(qs);
  Tensor k = concat_cols(ks);
  Tensor v = concat_cols(vs);
  if (adapters_.prefix && adapters_.prefix->prefix_len > 0) {
    backend.note(site_name(layer, "prefix"), OpClass::Adapter);
    k = concat_rows({adapters_.prefix->keys.at(layer), k});
    v = concat_rows({adapters_.prefix->values.at(layer), v});
  }

  const Tensor scores = backend.attention_scores(site_name(layer, "scores"), q, k, heads);
  backend.note(site_name(layer, "softmax"), OpClass::Softmax);
  const Tensor probs = softmax(scale(scores, 1.0 / std::sqrt(static_cast<double>(dh))));

  backend.note(site_name(layer, "attn_value"), OpClass::AttnValue);
  std::vector<Tensor> ctx;
  for (std::size_t g = 0; g < heads; ++g) {
    ctx.push_back(matmul(slice_rows(probs, g * seq, (g + 1) * seq),
                         slice_cols(v, g * dh, (g + 1) * dh)));
  }
  const Tensor attn = apply_linear(concat_cols(ctx), layer, LinearKind::Dense, backend, dropout_rng);

  backend.note(site_name(layer, "residual1"), OpClass::Residual);
  const Tensor x1 = add(x, attn);
  backend.note(site_name(layer, "ln2"), OpClass::LayerNorm);
  const Tensor h2 = layernorm(x1, blk.ln2_gamma, blk.ln2_beta);
  const Tensor f1 = apply_linear(h2, layer, LinearKind::Fc1, backend, dropout_rng);
  backend.note(site_name(layer, "gelu"), OpClass::Activation);
  const Tensor f2 = apply_linear(gelu(f1), layer, LinearKind::Fc2, backend, dropout_rng);
  backend.note(site_name(layer, "residual2"), OpClass::Residual);
  return add(x1, f2);
}

Tensor Transformer::forward_layers(const Tensor& x, std::size_t begin, std::size_t end,
                                   Backend& backend, Rng* dropout_rng) const {
  Tensor h = x;
  for (std::size_t l = begin; l < end; ++l) h = forward_block(h, l, backend, dropout_rng);
  return h;
}

Tensor Transformer::classify(const Tensor& hidden, Backend& backend) const {
  backend.note("final_ln", OpClass::LayerNorm);
  const Tensor h = layernorm(hidden, base_.lnf_gamma, base_.lnf_beta);
  backend.note("pool", OpClass::Pool);
  const Tensor pooled = mean_rows(h);
  backend.note("head", OpClass::Head);
  return linear(pooled, adapters_.head_w, adapters_.head_b);
}

Tensor Transformer::logits(std::span<const std::uint32_t> tokens, Backend& backend,
                           Rng* dropout_rng) const {
  const Tensor x = embed(tokens, backend);
  return classify(forward_layers(x, 0, base_.config.n_layers, backend, dropout_rng), backend);
}

}  // namespace slicefl
