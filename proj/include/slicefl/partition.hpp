// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slicefl/model.hpp"
#include "slicefl/tensor.hpp"

namespace slicefl {

enum class TrustDomain { Trusted, Untrusted };
enum class DataState { Plaintext, Masked };

std::string_view to_string(TrustDomain d);
std::string_view to_string(DataState s);

/// A tensor tagged with where it lives and whether it is masked. A
/// plaintext tensor must never sit in the untrusted domain during a secure
/// run; that is what the taint audit checks.
struct DomainTensor {
  Tensor inner;
  TrustDomain domain = TrustDomain::Trusted;
  DataState state = DataState::Plaintext;
  std::uint64_t lineage = 0;
};

/// Partitioning schemes. Plaintext is the unprotected federated baseline
/// (FL-LLM); Swmt shields the whole model in the enclave.
enum class Method { Method1, Method2, Swmt, Plaintext };
std::string_view to_string(Method m);
/// Accepts "method1", "method2", "swmt", "fl-llm" (or "plaintext").
Method parse_method(std::string_view text);

/// Which party executes a site: the data-owning client or the server.
enum class Role { Client, Server };

struct Site {
  std::string name;
  std::size_t layer = kNoLayer;  // kNoLayer for embedding and head sites
  OpClass cls = OpClass::Linear;
  TrustDomain domain = TrustDomain::Trusted;
  Role role = Role::Client;
  /// Untrusted site reached from trusted code through one-time-pad masking.
  bool masked_offload = false;
  /// Untrusted site that only touches the data owner's own inputs and
  /// public frozen weights; its plaintext is not a leak.
  bool owner_local = false;

  static constexpr std::size_t kNoLayer = static_cast<std::size_t>(-1);
};

class PartitionPlan {
 public:
  PartitionPlan(Method method, std::size_t split_layer, std::vector<Site> sites);

  Method method() const { return method_; }
  /// First server-side layer (Method2); 0 for the other methods.
  std::size_t split_layer() const { return split_layer_; }
  const std::vector<Site>& sites() const { return sites_; }

  /// Throws ContractError for a site the plan does not know.
  const Site& site(std::string_view name) const;
  bool contains(std::string_view name) const;
  TrustDomain domain(std::string_view name) const { return site(name).domain; }

  std::size_t count(TrustDomain d) const;
  std::size_t count_offloaded() const;
  /// Whether payloads on the client-server wire are masked.
  bool masks_wire() const { return method_ != Method::Plaintext; }

 private:
  Method method_;
  std::size_t split_layer_;
  std::vector<Site> sites_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Assigns every op site of `config` to a domain:
///   Method1   layer norms, softmax, activations, adapters and the head are
///             trusted; frozen linears and the Q.K product are untrusted
///             and reached through masking.
///   Method2   layers below split_layer (and the embedding) run on the
///             client; the rest runs in the server enclave.
///   Swmt      everything trusted.
///   Plaintext everything untrusted, no masking.
/// Throws ContractError if split_layer >= n_layers for Method2.
PartitionPlan build_plan(const TransformerConfig& config, Method method,
                         std::size_t split_layer = 0);

}  // namespace slicefl
