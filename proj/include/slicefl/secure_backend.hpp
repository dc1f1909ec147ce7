// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slicefl/model.hpp"
#include "slicefl/otp.hpp"
#include "slicefl/partition.hpp"
#include "slicefl/trace.hpp"
#include "slicefl/transformer.hpp"

namespace slicefl {

/// Deterministic pad generator for one party. Pad ids are
/// (party << 40) | sequence number, so ids never collide across parties.
class PadSource {
 public:
  PadSource(std::uint64_t seed, std::uint32_t party, PadLedger* ledger = nullptr);

  /// Fresh pad drawn from `dist`, whose scale must already be absolute.
  MaskPad next(const Shape& shape, const MaskDistribution& dist, std::string channel);

  std::uint32_t party() const { return party_; }
  std::uint64_t issued() const { return counter_; }
  PadLedger* ledger() const { return ledger_; }

 private:
  Rng rng_;
  std::uint32_t party_;
  std::uint64_t counter_ = 0;
  PadLedger* ledger_;
};

/// Fault injection and audit switches. Only tests should change these.
struct SecureOptions {
  MaskDistribution mask;
  /// Throw SecurityBreach at the first plaintext observation in the
  /// untrusted domain instead of only recording it.
  bool strict = false;
  /// Send the operands of the named site in plaintext, once.
  std::string skip_mask_at;
  /// Apply the first pad a second time on the next offload.
  bool reuse_pad = false;
};

/// Backend that executes ops where a PartitionPlan puts them. Untrusted
/// sites flagged for masked offload receive one-time-pad masked operands
/// and return masked results, which trusted code unmasks with a plaintext
/// copy of the public frozen weights. Gradients of offloaded sites take
/// the same route with fresh pads.
///
/// Autodiff nodes created by this backend call back into it during
/// backward(), so it must outlive every graph it builds.
class SecureBackend : public Backend {
 public:
  SecureBackend(const PartitionPlan& plan, std::string party, PadSource& pads, Trace& trace,
                SecureOptions options = {});

  Tensor frozen_linear(std::string_view site, const Tensor& x, const Tensor& w,
                       const Tensor& b) override;
  Tensor attention_scores(std::string_view site, const Tensor& q, const Tensor& k,
                          std::size_t n_heads) override;
  void note(std::string_view site, OpClass cls) override;

  /// Masked transfer of a tensor across the client/server split. Not
  /// differentiable.
  Tensor cross_split(std::string_view site, const Tensor& x);

  const PartitionPlan& plan() const { return plan_; }
  Trace& trace() { return trace_; }

 private:
  struct Outbound {
    std::vector<Tensor> payload;
    std::vector<Tensor> pads;
  };

  Outbound send_untrusted(const Site& s, Phase phase, const std::vector<Tensor>& operands);
  void receive_trusted(const Site& s, Phase phase, std::uint64_t bytes);
  Tensor offload_linear(const Site& s, Phase phase, const Tensor& x, const Tensor& w,
                        bool transpose_w);
  Tensor offload_scores(const Site& s, const Tensor& q, const Tensor& k, std::size_t n_heads);
  void offload_scores_grad(const Site& s, const Tensor& g, const Tensor& q, const Tensor& k,
                           std::size_t n_heads, Tensor& dq, Tensor& dk);
  MaskPad take_pad(const Tensor& x, const std::string& channel);
  void emit(TraceEvent ev);
  std::string party_of(const Site& s) const;

  const PartitionPlan& plan_;
  std::string party_;
  PadSource& pads_;
  Trace& trace_;
  SecureOptions options_;
  std::optional<MaskPad> retained_;
  bool skip_done_ = false;
};

/// Forward pass of `model` from embeddings `x` to logits under the
/// backend's plan. Method2 plans hand the split activations from client
/// to server through a masked transfer. `x` must be plaintext in the
/// domain that owns the embedding site.
DomainTensor secure_forward(SecureBackend& backend, const DomainTensor& x,
                            const Transformer& model, Rng* dropout_rng = nullptr);

/// Embeds `tokens` and runs secure_forward.
Tensor secure_logits(SecureBackend& backend, const Transformer& model,
                     std::span<const std::uint32_t> tokens, Rng* dropout_rng = nullptr);

}  // namespace slicefl
