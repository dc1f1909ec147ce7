// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>

#include <json.hpp>

#include "slicefl/adapters.hpp"
#include "slicefl/model.hpp"
#include "slicefl/partition.hpp"

namespace slicefl {

/// Simulated cost weights. Compute is priced per work unit (roughly one
/// multiply-add) by op class and domain; a class without an explicit entry
/// uses the domain default.
struct CostModel {
  double trusted_default = 40.0;
  double untrusted_default = 1.0;
  std::map<OpClass, double> trusted;
  std::map<OpClass, double> untrusted;
  /// Per boundary crossing.
  double crossing = 1.0e4;
  /// Per byte of masked payload; covers masking, unmasking and the
  /// correction terms of masked products.
  double masked_byte = 20.0;
  /// Per work unit of pad-only precompute (h(r), r_a.r_b), done offline.
  double offline = 0.0;

  double weight(OpClass cls, TrustDomain domain) const;
  /// Throws ContractError on a negative weight.
  void validate() const;
  nlohmann::json to_json() const;
};

/// One sample through the model.
struct Workload {
  std::size_t seq_len = 16;
  bool training = true;
  TuningConfig tuning;
};

struct CostReport {
  Method method = Method::Plaintext;
  double trusted_compute = 0;
  double untrusted_compute = 0;
  double offline_compute = 0;
  double crossing_cost = 0;
  double masked_byte_cost = 0;
  double total = 0;
  std::uint64_t crossings = 0;
  std::uint64_t masked_bytes = 0;

  nlohmann::json to_json() const;
};

/// Analytic cost of one workload sample under `plan`. Gradients start at
/// the first layer carrying trainable parameters (the split layer for
/// Method2); a reached site costs twice its forward work again, a frozen
/// linear once. Offloaded sites cost two crossings per pass.
CostReport simulate_cost(const PartitionPlan& plan, const TransformerConfig& config,
                         const Workload& workload, const CostModel& model);

}  // namespace slicefl
