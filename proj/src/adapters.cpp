// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slicefl/errors.hpp"
#include "slicefl/ops.hpp"

namespace slicefl {
namespace {

Tensor uniform_tensor(Shape shape, Rng& rng, double bound) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor normal_tensor(Shape shape, Rng& rng, double stddev) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = stddev * rng.normal();
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor copy_leaf(const Tensor& t) {
  Tensor out = t.detach();
  out.set_requires_grad(t.requires_grad());
  return out;
}

std::pair<std::size_t, std::size_t> linear_dims(const TransformerConfig& c, LinearKind kind) {
  switch (kind) {
    case LinearKind::Qkv: return {c.d_model, 3 * c.d_model};
    case LinearKind::Dense: return {c.d_model, c.d_model};
    case LinearKind::Fc1: return {c.d_model, c.d_ff};
    case LinearKind::Fc2: return {c.d_ff, c.d_model};
  }
  throw ContractError("bad linear kind");
}

}  // namespace

LoraAdapter LoraAdapter::create(std::size_t d_in, std::size_t d_out, std::size_t rank,
                                double alpha, double dropout_p, std::size_t layer,
                                LinearKind target, Rng& rng) {
  if (rank == 0 || rank > std::min(d_in, d_out)) {
    throw DimensionError("LoRA rank " + std::to_string(rank) + " invalid for " +
                         std::to_string(d_out) + "x" + std::to_string(d_in));
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw ContractError("LoRA dropout must be in [0, 1)");
  LoraAdapter l;
  l.a = uniform_tensor({rank, d_in}, rng, 1.0 / std::sqrt(static_cast<double>(d_in)));
  l.b = Tensor({d_out, rank}, true);
  l.rank = rank;
  l.alpha = alpha;
  l.dropout_p = dropout_p;
  l.layer = layer;
  l.target = target;
  return l;
}

Tensor lora_delta(const Tensor& x, const LoraAdapter& lora, Rng* dropout_rng) {
  if (lora.a.rows() != lora.rank || lora.b.cols() != lora.rank) {
    throw DimensionError("LoRA factors disagree with rank " + std::to_string(lora.rank));
  }
  if (x.cols() != lora.a.cols()) {
    throw DimensionError("LoRA input width " + std::to_string(x.cols()) + " vs A " +
                         shape_str(lora.a.shape()));
  }
  Tensor input = x;
  if (dropout_rng && lora.dropout_p > 0.0) {
    const double keep = 1.0 - lora.dropout_p;
    std::vector<double> m(x.numel());
    for (double& v : m) v = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
    input = mul(x, Tensor(x.shape(), std::move(m)));
  }
  return scale(matmul_nt(matmul_nt(input, lora.a), lora.b), lora.scaling());
}

Tensor lora_forward(const Tensor& x, const Tensor& w, const LoraAdapter& lora,
                    Rng* dropout_rng) {
  if (w.rows() != lora.b.rows() || w.cols() != lora.a.cols()) {
    throw DimensionError("LoRA factors do not fit weight " + shape_str(w.shape()));
  }
  return add(matmul_nt(x, w), lora_delta(x, lora, dropout_rng));
}

PrefixEmbedding PrefixEmbedding::create(std::size_t n_layers, std::size_t prefix_len,
                                        std::size_t d_model, Rng& rng) {
  PrefixEmbedding p;
  p.prefix_len = prefix_len;
  if (prefix_len == 0) return p;
  for (std::size_t l = 0; l < n_layers; ++l) {
    p.keys.push_back(normal_tensor({prefix_len, d_model}, rng, 0.5));
    p.values.push_back(normal_tensor({prefix_len, d_model}, rng, 0.5));
  }
  return p;
}

std::vector<std::size_t> SpfPartition::train_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t g : train_heads)
    for (std::size_t r = 0; r < group_rows; ++r) rows.push_back(g * group_rows + r);
  return rows;
}

std::vector<std::size_t> SpfPartition::freeze_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t g : freeze_heads)
    for (std::size_t r = 0; r < group_rows; ++r) rows.push_back(g * group_rows + r);
  return rows;
}

std::size_t spf_train_group_count(std::size_t n_groups, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw ContractError("SPF ratio must be in (0, 1], got " + std::to_string(ratio));
  }
  // The epsilon absorbs representation error in products like 0.625 * 8.
  const auto k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n_groups) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n_groups);
}

SpfPartition spf_select_heads(const Tensor& w_all, const Tensor& bias, std::size_t n_groups,
                              double ratio) {
  if (w_all.ndim() != 2) throw DimensionError("SPF weight must be a matrix");
  const std::size_t d_out = w_all.rows(), d_in = w_all.cols();
  if (n_groups == 0 || d_out % n_groups != 0) {
    throw DimensionError("SPF: " + std::to_string(d_out) + " output rows do not split into " +
                         std::to_string(n_groups) + " groups");
  }
  if (bias.numel() != d_out) throw DimensionError("SPF: bias does not match weight rows");
  const std::size_t k = spf_train_group_count(n_groups, ratio);

  SpfPartition part;
  part.n_groups = n_groups;
  part.group_rows = d_out / n_groups;
  part.ratio = ratio;
  part.weight_shape = w_all.shape();
  part.scores.assign(n_groups, 0.0);
  const auto w = w_all.values();
  for (std::size_t row = 0; row < d_out; ++row) {
    double s = 0.0;
    for (std::size_t j = 0; j < d_in; ++j) s += std::abs(w[row * d_in + j]);
    part.scores[row / part.group_rows] += s;
  }
  std::vector<std::size_t> order(n_groups);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return part.scores[a] > part.scores[b];
  });
  part.train_heads.assign(order.begin(), order.begin() + static_cast<long>(k));
  part.freeze_heads.assign(order.begin() + static_cast<long>(k), order.end());
  std::sort(part.train_heads.begin(), part.train_heads.end());
  std::sort(part.freeze_heads.begin(), part.freeze_heads.end());
  return part;
}

Tensor spf_forward(const Tensor& x, const Tensor& w_all, const Tensor& bias,
                   const SpfPartition& part) {
  if (w_all.shape() != part.weight_shape || bias.numel() != part.weight_shape.at(0)) {
    throw ContractError("SPF partition built for " + shape_str(part.weight_shape) +
                        " used with weight " + shape_str(w_all.shape()));
  }
  const std::vector<std::size_t> train = part.train_rows();
  const std::vector<std::size_t> freeze = part.freeze_rows();
  std::vector<Tensor> parts{linear(x, gather_rows(w_all, train), gather_rows(bias, train))};
  std::vector<std::vector<std::size_t>> index{train};
  if (!freeze.empty()) {
    parts.push_back(linear(x, gather_rows(w_all.detach(), freeze), gather_rows(bias.detach(), freeze)));
    index.push_back(freeze);
  }
  return scatter_cols(parts, index, w_all.rows());
}

std::string_view to_string(TuningMode mode) {
  switch (mode) {
    case TuningMode::None: return "none";
    case TuningMode::Lora: return "lora";
    case TuningMode::PtuningV2: return "ptuningv2";
    case TuningMode::Spf: return "spf";
  }
  return "?";
}

TuningMode parse_tuning_mode(std::string_view text) {
  for (TuningMode m : {TuningMode::None, TuningMode::Lora, TuningMode::PtuningV2, TuningMode::Spf}) {
    if (to_string(m) == text) return m;
  }
  throw ContractError("unknown tuning mode: " + std::string(text));
}

Adapters Adapters::create(const BaseModel& base, const TuningConfig& tuning, std::uint64_t seed) {
  const TransformerConfig& c = base.config;
  if (tuning.first_layer > c.n_layers) throw ContractError("adapter start layer beyond model depth");
  Rng rng(seed, stream_id("adapters"));
  Adapters a;
  auto attach_lora = [&](std::size_t layer, LinearKind kind) {
    const auto [d_in, d_out] = linear_dims(c, kind);
    a.lora.emplace(std::pair{layer, kind},
                   LoraAdapter::create(d_in, d_out, tuning.lora_rank, tuning.lora_alpha,
                                       tuning.lora_dropout, layer, kind, rng));
  };
  switch (tuning.mode) {
    case TuningMode::None:
      break;
    case TuningMode::Lora:
      for (std::size_t l = tuning.first_layer; l < c.n_layers; ++l)
        for (LinearKind kind : tuning.lora_targets) attach_lora(l, kind);
      break;
    case TuningMode::PtuningV2:
      a.prefix = PrefixEmbedding::create(c.n_layers, tuning.prefix_len, c.d_model, rng);
      break;
    case TuningMode::Spf:
      for (std::size_t l = tuning.first_layer; l < c.n_layers; ++l) {
        const BlockWeights& blk = base.blocks[l];
        for (auto [kind, ratio] : {std::pair{LinearKind::Qkv, tuning.qkv_ratio},
                                   std::pair{LinearKind::Dense, tuning.dense_ratio}}) {
          SpfLinear s;
          s.partition = spf_select_heads(blk.weight(kind), blk.bias(kind), c.n_heads, ratio);
          s.partition.layer = l;
          s.partition.target = kind;
          s.weight = blk.weight(kind).detach().set_requires_grad(true);
          s.bias = blk.bias(kind).detach().set_requires_grad(true);
          a.spf.emplace(std::pair{l, kind}, std::move(s));
        }
        attach_lora(l, LinearKind::Fc1);
        attach_lora(l, LinearKind::Fc2);
      }
      break;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(c.d_model));
  a.head_w = uniform_tensor({c.n_classes, c.d_model}, rng, bound);
  a.head_b = Tensor({c.n_classes}, true);
  a.head_trainable = tuning.train_head;
  a.head_w.set_requires_grad(tuning.train_head);
  a.head_b.set_requires_grad(tuning.train_head);
  return a;
}

std::vector<std::pair<std::string, Tensor>> Adapters::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [key, l] : lora) {
    const std::string base = site_name(key.first, key.second);
    out.emplace_back(base + ".lora_a", l.a);
    out.emplace_back(base + ".lora_b", l.b);
  }
  if (prefix) {
    for (std::size_t l = 0; l < prefix->keys.size(); ++l) {
      out.emplace_back(site_name(l, "prefix_k"), prefix->keys[l]);
      out.emplace_back(site_name(l, "prefix_v"), prefix->values[l]);
    }
  }
  for (const auto& [key, s] : spf) {
    const std::string base = site_name(key.first, key.second);
    out.emplace_back(base + ".spf_w", s.weight);
    out.emplace_back(base + ".spf_b", s.bias);
  }
  if (head_trainable) {
    out.emplace_back("head.w", head_w);
    out.emplace_back("head.b", head_b);
  }
  return out;
}

std::vector<Tensor> Adapters::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

void Adapters::load(const std::vector<std::pair<std::string, Tensor>>& named) {
  auto mine = named_parameters();
  if (mine.size() != named.size()) {
    throw ContractError("adapter load: expected " + std::to_string(mine.size()) +
                        " tensors, got " + std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].first != named[i].first || mine[i].second.shape() != named[i].second.shape()) {
      throw ContractError("adapter load: tensor '" + named[i].first + "' does not match '" +
                          mine[i].first + "'");
    }
    const auto src = named[i].second.values();
    std::copy(src.begin(), src.end(), mine[i].second.mutable_values().begin());
  }
}

Adapters Adapters::clone() const {
  Adapters c;
  for (const auto& [key, l] : lora) {
    LoraAdapter copy = l;
    copy.a = copy_leaf(l.a);
    copy.b = copy_leaf(l.b);
    c.lora.emplace(key, std::move(copy));
  }
  if (prefix) {
    PrefixEmbedding p;
    p.prefix_len = prefix->prefix_len;
    for (const Tensor& t : prefix->keys) p.keys.push_back(copy_leaf(t));
    for (const Tensor& t : prefix->values) p.values.push_back(copy_leaf(t));
    c.prefix = std::move(p);
  }
  for (const auto& [key, s] : spf) {
    c.spf.emplace(key, SpfLinear{s.partition, copy_leaf(s.weight), copy_leaf(s.bias)});
  }
  c.head_w = copy_leaf(head_w);
  c.head_b = copy_leaf(head_b);
  c.head_trainable = head_trainable;
  return c;
}

std::size_t count_trainable_params(const Adapters& adapters) {
  std::size_t n = 0;
  for (const auto& [key, l] : adapters.lora) {
    if (l.a.requires_grad()) n += l.a.numel();
    if (l.b.requires_grad()) n += l.b.numel();
  }
  if (adapters.prefix) {
    for (const Tensor& t : adapters.prefix->keys) n += t.requires_grad() ? t.numel() : 0;
    for (const Tensor& t : adapters.prefix->values) n += t.requires_grad() ? t.numel() : 0;
  }
  for (const auto& [key, s] : adapters.spf) {
    n += s.partition.train_rows().size() * (s.weight.cols() + 1);
  }
  if (adapters.head_trainable) n += adapters.head_w.numel() + adapters.head_b.numel();
  return n;
}

std::size_t count_trainable_params(const TransformerConfig& c, const TuningConfig& tuning) {
  c.validate();
  const std::size_t layers = c.n_layers - std::min(tuning.first_layer, c.n_layers);
  auto lora_size = [&](LinearKind kind) {
    const auto [d_in, d_out] = linear_dims(c, kind);
    return tuning.lora_rank * (d_in + d_out);
  };
  std::size_t n = 0;
  switch (tuning.mode) {
    case TuningMode::None:
      break;
    case TuningMode::Lora:
      for (LinearKind kind : tuning.lora_targets) n += layers * lora_size(kind);
      break;
    case TuningMode::PtuningV2:
      n += c.n_layers * 2 * tuning.prefix_len * c.d_model;
      break;
    case TuningMode::Spf: {
      const std::size_t qkv_rows = spf_train_group_count(c.n_heads, tuning.qkv_ratio) * 3 * c.d_head;
      const std::size_t dense_rows =
          spf_train_group_count(c.n_heads, tuning.dense_ratio) * (c.d_model / c.n_heads);
      n += layers * ((qkv_rows + dense_rows) * (c.d_model + 1) + lora_size(LinearKind::Fc1) +
                     lora_size(LinearKind::Fc2));
      break;
    }
  }
  if (tuning.train_head) n += c.n_classes * (c.d_model + 1);
  return n;
}

}  // namespace slicefl
