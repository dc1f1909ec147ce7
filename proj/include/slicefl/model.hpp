// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slicefl/rng.hpp"
#include "slicefl/tensor.hpp"

namespace slicefl {

struct TransformerConfig {
  std::size_t n_layers = 6;
  std::size_t d_model = 32;
  std::size_t n_heads = 8;
  std::size_t d_head = 4;
  std::size_t d_ff = 64;
  std::size_t vocab = 32;
  std::size_t n_classes = 4;
  std::size_t max_seq = 16;

  /// Throws ContractError unless every dim is >= 1 and
  /// d_model == n_heads * d_head.
  void validate() const;
  bool operator==(const TransformerConfig&) const = default;
};

/// The four frozen linear layers of an encoder block.
enum class LinearKind { Qkv, Dense, Fc1, Fc2 };
std::string_view to_string(LinearKind kind);
LinearKind parse_linear_kind(std::string_view text);

/// Coarse classes used to attribute executed ops to a trust domain and to
/// price them in the cost model.
enum class OpClass {
  Embedding,
  LayerNorm,
  Linear,
  Scores,
  Softmax,
  AttnValue,
  Activation,
  Residual,
  Adapter,
  Pool,
  Head,
  Loss,
};
std::string_view to_string(OpClass cls);

/// "L<layer>.<op>", e.g. "L2.qkv".
std::string site_name(std::size_t layer, std::string_view op);
std::string site_name(std::size_t layer, LinearKind kind);

/// Frozen weights of one pre-LN encoder block. The fused QKV weight is laid
/// out head-major: rows [g*3*d_head, (g+1)*3*d_head) hold the query, key
/// and value rows of head g in that order.
struct BlockWeights {
  Tensor ln1_gamma, ln1_beta;
  Tensor w_qkv, b_qkv;
  Tensor w_dense, b_dense;
  Tensor ln2_gamma, ln2_beta;
  Tensor w_fc1, b_fc1;
  Tensor w_fc2, b_fc2;

  const Tensor& weight(LinearKind kind) const;
  const Tensor& bias(LinearKind kind) const;
};

/// Public frozen base model shared by every party.
struct BaseModel {
  TransformerConfig config;
  Tensor tok_emb;  // vocab x d_model
  Tensor pos_emb;  // max_seq x d_model
  std::vector<BlockWeights> blocks;
  Tensor lnf_gamma, lnf_beta;

  static BaseModel random(const TransformerConfig& config, std::uint64_t seed);
  std::size_t parameter_count() const;
};

/// Where the frozen linear algebra of a forward pass runs. The plaintext
/// backend computes in place; the trust-partition backends route the same
/// calls across a simulated enclave boundary.
class Backend {
 public:
  virtual ~Backend() = default;

  /// x . w^T + b for frozen w and b.
  virtual Tensor frozen_linear(std::string_view site, const Tensor& x, const Tensor& w,
                               const Tensor& b) = 0;

  /// Per-head q_h . k_h^T blocks stacked by rows: [(n_heads * s) x n] for
  /// q [s x d] and k [n x d].
  virtual Tensor attention_scores(std::string_view site, const Tensor& q, const Tensor& k,
                                  std::size_t n_heads) = 0;

  /// Records an op computed by the caller at `site`.
  virtual void note(std::string_view site, OpClass cls) = 0;
};

class PlainBackend : public Backend {
 public:
  Tensor frozen_linear(std::string_view site, const Tensor& x, const Tensor& w,
                       const Tensor& b) override;
  Tensor attention_scores(std::string_view site, const Tensor& q, const Tensor& k,
                          std::size_t n_heads) override;
  void note(std::string_view, OpClass) override {}
};

/// Stacked per-head score blocks computed directly.
Tensor stacked_head_scores(const Tensor& q, const Tensor& k, std::size_t n_heads);

}  // namespace slicefl
