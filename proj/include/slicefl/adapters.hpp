// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "slicefl/model.hpp"
#include "slicefl/rng.hpp"
#include "slicefl/tensor.hpp"

namespace slicefl {

/// Low-rank adapter on one frozen linear: delta(x) = (alpha/rank) . (x A^T) B^T.
struct LoraAdapter {
  Tensor a;  // rank x d_in
  Tensor b;  // d_out x rank, zero at init
  std::size_t rank = 0;
  double alpha = 1.0;
  double dropout_p = 0.0;
  std::size_t layer = 0;
  LinearKind target = LinearKind::Qkv;

  double scaling() const { return alpha / static_cast<double>(rank); }

  static LoraAdapter create(std::size_t d_in, std::size_t d_out, std::size_t rank,
                            double alpha, double dropout_p, std::size_t layer,
                            LinearKind target, Rng& rng);
};

/// Adapter path only. Dropout on the adapter input applies iff
/// `dropout_rng` is non-null (training).
Tensor lora_delta(const Tensor& x, const LoraAdapter& lora, Rng* dropout_rng);

/// x . w^T + lora_delta(x).
Tensor lora_forward(const Tensor& x, const Tensor& w, const LoraAdapter& lora,
                    Rng* dropout_rng = nullptr);

/// Learnable per-layer key/value prefixes (P-tuning v2). Prefixes are
/// prepended to the keys and values of every layer, never to the queries.
struct PrefixEmbedding {
  std::size_t prefix_len = 0;
  std::vector<Tensor> keys;    // per layer, prefix_len x d_model
  std::vector<Tensor> values;  // per layer, prefix_len x d_model

  static PrefixEmbedding create(std::size_t n_layers, std::size_t prefix_len,
                                std::size_t d_model, Rng& rng);
};

/// Head selection for one linear under sparsification fine-tuning: output
/// rows are split into n_groups contiguous groups ("heads"); the groups
/// with the largest L1 norm are trainable and the rest stay frozen.
struct SpfPartition {
  std::size_t layer = 0;
  LinearKind target = LinearKind::Qkv;
  std::size_t n_groups = 0;
  std::size_t group_rows = 0;
  double ratio = 1.0;
  std::vector<std::size_t> train_heads;   // sorted
  std::vector<std::size_t> freeze_heads;  // sorted
  std::vector<double> scores;             // L1 norm per group
  Shape weight_shape;

  std::vector<std::size_t> train_rows() const;
  std::vector<std::size_t> freeze_rows() const;
};

/// Number of trainable groups: ceil(ratio * n_groups), at least 1.
std::size_t spf_train_group_count(std::size_t n_groups, double ratio);

/// Scores every group by the L1 norm of its rows and keeps the top
/// spf_train_group_count() groups, ties going to the lower index.
SpfPartition spf_select_heads(const Tensor& w_all, const Tensor& bias, std::size_t n_groups,
                              double ratio);

/// (x W_train^T + b_train) and (x W_freeze^T + b_freeze) scattered back
/// into the original output order. Gradients reach only the trainable rows
/// of w_all and entries of bias.
Tensor spf_forward(const Tensor& x, const Tensor& w_all, const Tensor& bias,
                   const SpfPartition& part);

/// A fine-tuned linear under SPF: trainable copies of the frozen weights
/// plus the partition that decides which rows may move.
struct SpfLinear {
  SpfPartition partition;
  Tensor weight;
  Tensor bias;
};

enum class TuningMode { None, Lora, PtuningV2, Spf };
std::string_view to_string(TuningMode mode);
TuningMode parse_tuning_mode(std::string_view text);

struct TuningConfig {
  TuningMode mode = TuningMode::Lora;
  std::size_t lora_rank = 8;
  double lora_alpha = 16.0;
  double lora_dropout = 0.1;
  std::vector<LinearKind> lora_targets = {LinearKind::Qkv};
  std::size_t prefix_len = 4;
  /// Adapters are attached to layers >= first_layer (the split point for
  /// server-side fine-tuning, 0 otherwise).
  std::size_t first_layer = 0;
  double qkv_ratio = 0.25;
  double dense_ratio = 0.5;
  bool train_head = true;
};

/// Everything that is fine-tuned for one model: W_k in federated terms.
struct Adapters {
  std::map<std::pair<std::size_t, LinearKind>, LoraAdapter> lora;
  std::optional<PrefixEmbedding> prefix;
  std::map<std::pair<std::size_t, LinearKind>, SpfLinear> spf;
  Tensor head_w;  // n_classes x d_model
  Tensor head_b;  // n_classes
  bool head_trainable = true;

  /// Builds the adapter set a tuning mode calls for. Spf mode attaches SPF
  /// to the QKV and dense linears and LoRA to the MLP of every layer at or
  /// above first_layer.
  static Adapters create(const BaseModel& base, const TuningConfig& tuning, std::uint64_t seed);

  /// Trainable tensors in a fixed order with stable names.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;
  /// Copies values by name; names and shapes must match exactly.
  void load(const std::vector<std::pair<std::string, Tensor>>& named);
  /// Deep copy with fresh leaf tensors.
  Adapters clone() const;
};

/// Parameters that receive gradients under `adapters`: LoRA factors,
/// prefixes, the trainable rows (and bias entries) of SPF linears, and the
/// classifier head when it is trainable.
std::size_t count_trainable_params(const Adapters& adapters);

/// Closed-form count for a configuration, without building tensors.
std::size_t count_trainable_params(const TransformerConfig& config, const TuningConfig& tuning);

}  // namespace slicefl
