// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "slicefl/adapters.hpp"
#include "slicefl/model.hpp"

namespace slicefl {

/// Pre-LN encoder classifier: embeddings, n_layers blocks, final layer
/// norm, mean pooling and a linear head. Holds references only; the base
/// model and adapters must outlive it.
///
/// Which adapters are live is decided by the Adapters object: LoRA on a
/// (layer, linear) pair, prefixes on every layer, SPF replacing a frozen
/// linear. Frozen linears and the Q.K products go through the Backend so a
/// trust partition can move them across the enclave boundary.
class Transformer {
 public:
  Transformer(const BaseModel& base, const Adapters& adapters);

  /// Token plus position embeddings: [seq x d_model].
  Tensor embed(std::span<const std::uint32_t> tokens, Backend& backend) const;

  /// One block. Dropout on LoRA paths applies iff dropout_rng is set.
  Tensor forward_block(const Tensor& x, std::size_t layer, Backend& backend,
                       Rng* dropout_rng = nullptr) const;

  /// Blocks [begin, end).
  Tensor forward_layers(const Tensor& x, std::size_t begin, std::size_t end, Backend& backend,
                        Rng* dropout_rng = nullptr) const;

  /// Final layer norm, mean pool and head: [1 x n_classes].
  Tensor classify(const Tensor& hidden, Backend& backend) const;

  Tensor logits(std::span<const std::uint32_t> tokens, Backend& backend,
                Rng* dropout_rng = nullptr) const;

  const BaseModel& base() const { return base_; }
  const Adapters& adapters() const { return adapters_; }

 private:
  Tensor apply_linear(const Tensor& x, std::size_t layer, LinearKind kind, Backend& backend,
                      Rng* dropout_rng) const;

  const BaseModel& base_;
  const Adapters& adapters_;
};

}  // namespace slicefl
