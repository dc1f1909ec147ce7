// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/model.hpp"

#include <cmath>
#include <string>

#include "slicefl/errors.hpp"
#include "slicefl/ops.hpp"

namespace slicefl {

void TransformerConfig::validate() const {
  if (n_layers == 0 || d_model == 0 || n_heads == 0 || d_head == 0 || d_ff == 0 ||
      vocab == 0 || n_classes == 0 || max_seq == 0) {
    throw ContractError("transformer dims must all be >= 1");
  }
  if (d_model != n_heads * d_head) {
    throw ContractError("d_model (" + std::to_string(d_model) + ") != n_heads * d_head (" +
                        std::to_string(n_heads) + " * " + std::to_string(d_head) + ")");
  }
}

std::string_view to_string(LinearKind kind) {
  switch (kind) {
    case LinearKind::Qkv: return "qkv";
    case LinearKind::Dense: return "dense";
    case LinearKind::Fc1: return "fc1";
    case LinearKind::Fc2: return "fc2";
  }
  return "?";
}

LinearKind parse_linear_kind(std::string_view text) {
  for (LinearKind k : {LinearKind::Qkv, LinearKind::Dense, LinearKind::Fc1, LinearKind::Fc2}) {
    if (to_string(k) == text) return k;
  }
  throw ContractError("unknown linear layer: " + std::string(text));
}

std::string_view to_string(OpClass cls) {
  switch (cls) {
    case OpClass::Embedding: return "embedding";
    case OpClass::LayerNorm: return "layernorm";
    case OpClass::Linear: return "linear";
    case OpClass::Scores: return "scores";
    case OpClass::Softmax: return "softmax";
    case OpClass::AttnValue: return "attn_value";
    case OpClass::Activation: return "activation";
    case OpClass::Residual: return "residual";
    case OpClass::Adapter: return "adapter";
    case OpClass::Pool: return "pool";
    case OpClass::Head: return "head";
    case OpClass::Loss: return "loss";
  }
  return "?";
}

std::string site_name(std::size_t layer, std::string_view op) {
  return "L" + std::to_string(layer) + "." + std::string(op);
}

std::string site_name(std::size_t layer, LinearKind kind) {
  return site_name(layer, to_string(kind));
}

const Tensor& BlockWeights::weight(LinearKind kind) const {
  switch (kind) {
    case LinearKind::Qkv: return w_qkv;
    case LinearKind::Dense: return w_dense;
    case LinearKind::Fc1: return w_fc1;
    case LinearKind::Fc2: return w_fc2;
  }
  throw ContractError("bad linear kind");
}

const Tensor& BlockWeights::bias(LinearKind kind) const {
  switch (kind) {
    case LinearKind::Qkv: return b_qkv;
    case LinearKind::Dense: return b_dense;
    case LinearKind::Fc1: return b_fc1;
    case LinearKind::Fc2: return b_fc2;
  }
  throw ContractError("bad linear kind");
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double stddev, double offset = 0.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = offset + stddev * rng.normal();
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

BaseModel BaseModel::random(const TransformerConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed, stream_id("base-model"));
  const std::size_t d = config.d_model, ff = config.d_ff;
  BaseModel m;
  m.config = config;
  m.tok_emb = random_tensor({config.vocab, d}, rng, 1.0);
  m.pos_emb = random_tensor({config.max_seq, d}, rng, 0.1);
  const double sd_in = 1.0 / std::sqrt(static_cast<double>(d));
  const double sd_ff = 1.0 / std::sqrt(static_cast<double>(ff));
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    BlockWeights b;
    b.ln1_gamma = random_tensor({d}, rng, 0.1, 1.0);
    b.ln1_beta = random_tensor({d}, rng, 0.05);
    b.w_qkv = random_tensor({3 * d, d}, rng, sd_in);
    b.b_qkv = random_tensor({3 * d}, rng, 0.02);
    b.w_dense = random_tensor({d, d}, rng, sd_in);
    b.b_dense = random_tensor({d}, rng, 0.02);
    b.ln2_gamma = random_tensor({d}, rng, 0.1, 1.0);
    b.ln2_beta = random_tensor({d}, rng, 0.05);
    b.w_fc1 = random_tensor({ff, d}, rng, sd_in);
    b.b_fc1 = random_tensor({ff}, rng, 0.02);
    b.w_fc2 = random_tensor({d, ff}, rng, sd_ff);
    b.b_fc2 = random_tensor({d}, rng, 0.02);
    m.blocks.push_back(std::move(b));
  }
  m.lnf_gamma = random_tensor({d}, rng, 0.1, 1.0);
  m.lnf_beta = random_tensor({d}, rng, 0.05);
  return m;
}

std::size_t BaseModel::parameter_count() const {
  std::size_t n = tok_emb.numel() + pos_emb.numel() + lnf_gamma.numel() + lnf_beta.numel();
  for (const BlockWeights& b : blocks) {
    for (const Tensor* t : {&b.ln1_gamma, &b.ln1_beta, &b.w_qkv, &b.b_qkv, &b.w_dense,
                            &b.b_dense, &b.ln2_gamma, &b.ln2_beta, &b.w_fc1, &b.b_fc1,
                            &b.w_fc2, &b.b_fc2}) {
      n += t->numel();
    }
  }
  return n;
}

Tensor stacked_head_scores(const Tensor& q, const Tensor& k, std::size_t n_heads) {
  if (q.cols() != k.cols() || n_heads == 0 || q.cols() % n_heads != 0) {
    throw DimensionError("attention scores: q " + shape_str(q.shape()) + " k " +
                         shape_str(k.shape()) + " heads " + std::to_string(n_heads));
  }
  const std::size_t dh = q.cols() / n_heads;
  std::vector<Tensor> blocks;
  blocks.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    blocks.push_back(matmul_nt(slice_cols(q, h * dh, (h + 1) * dh),
                               slice_cols(k, h * dh, (h + 1) * dh)));
  }
  return concat_rows(blocks);
}

Tensor PlainBackend::frozen_linear(std::string_view, const Tensor& x, const Tensor& w,
                                   const Tensor& b) {
  return linear(x, w, b);
}

Tensor PlainBackend::attention_scores(std::string_view, const Tensor& q, const Tensor& k,
                                      std::size_t n_heads) {
  return stacked_head_scores(q, k, n_heads);
}

}  // namespace slicefl
