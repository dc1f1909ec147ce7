// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "slicefl/adapters.hpp"
#include "slicefl/cost.hpp"
#include "slicefl/dataset.hpp"
#include "slicefl/federation.hpp"
#include "slicefl/otp.hpp"
#include "slicefl/partition.hpp"
#include "slicefl/precision.hpp"
#include "slicefl/secure_backend.hpp"
#include "slicefl/trace.hpp"
#include "slicefl/wire.hpp"

namespace slicefl {

struct FedConfig {
  Method method = Method::Method1;
  TransformerConfig model;
  TuningConfig tuning;
  std::size_t rounds = 10;
  std::size_t local_steps = 5;
  std::size_t batch_size = 8;
  double lr = 2e-2;
  std::uint64_t seed = 1;
  Precision precision = Precision::Exact;
  std::size_t split_layer = 4;
  /// Server-side training steps of Method2.
  std::size_t server_steps = 200;
  MaskDistribution mask;
  /// Absolute half-width of the pre-shared wire pads.
  double wire_scale = 4.0;
  CostModel cost;
  /// Keep every trace event (for trace.jsonl) instead of counts only.
  bool keep_trace = false;
  /// Fault injection for the secure backends.
  SecureOptions secure;

  /// Throws ContractError on an inconsistent configuration.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Observation points for tests and tooling.
struct RunHooks {
  /// Plaintext updates as unmasked in the server enclave, and the
  /// resulting global model.
  std::function<void(std::size_t round, const std::vector<RoundMessage>& updates,
                     const GlobalModel& global)>
      on_aggregate;
  /// Every frame put on the wire, with the plaintext it carries.
  std::function<void(const RoundMessage& frame, const NamedTensors& plaintext)> on_wire;
  /// Method2: a client's plaintext split activations next to the copy the
  /// server enclave recovered.
  std::function<void(std::uint32_t client, std::size_t example, const Tensor& client_side,
                     const Tensor& server_side)>
      on_embeddings;
};

struct TrainingReport {
  Method method = Method::Method1;
  TuningMode tuning = TuningMode::Lora;
  Precision precision = Precision::Exact;
  std::size_t clients = 0;
  std::size_t rounds = 0;
  std::uint64_t seed = 0;
  std::size_t trainable_params = 0;
  /// Method1 family: example-weighted mean client loss per round.
  std::vector<double> round_losses;
  /// Loss per optimizer step (client mean for the federated loop).
  std::vector<double> step_losses;
  EvalResult eval;
  AuditReport audit;
  CostReport cost;
  nlohmann::json pads;
  std::map<std::string, std::size_t> messages;
  /// Parameter or gradient frames sent by the server to clients.
  std::size_t server_parameter_messages = 0;
  NamedTensors final_params;
  std::vector<TraceEvent> trace_events;

  nlohmann::json to_json() const;
};

/// Federated adapter averaging with the Method1 partition on every client.
TrainingReport run_method1(const FedConfig& config, const FederatedData& data,
                           const RunHooks& hooks = {});

/// Split fine-tuning: clients upload masked split activations once; the
/// server enclave trains SPF linears and MLP LoRA on the upper layers.
TrainingReport run_method2(const FedConfig& config, const FederatedData& data,
                           const RunHooks& hooks = {});

/// The Method1 loop with the Plaintext (FL-LLM) or Swmt partition.
TrainingReport run_baseline(const FedConfig& config, const FederatedData& data, Method mode,
                            const RunHooks& hooks = {});

/// Dispatches on config.method.
TrainingReport run(const FedConfig& config, const FederatedData& data,
                   const RunHooks& hooks = {});

/// Single-party training on `train` with client 1's random streams for
/// rounds * local_steps steps under config.method's partition (Method1,
/// Swmt or Plaintext). The reference for a one-client federation.
TrainingReport run_centralized(const FedConfig& config, const Dataset& train,
                               const Dataset& test);

/// Server half of Method2. Holds the upper layers and the uploaded split
/// activations inside the enclave; nothing it learns is sent back.
class SplitServer {
 public:
  SplitServer(const FedConfig& config, const BaseModel& base, std::size_t clients,
              Network& network, Trace& trace, PadLedger& ledger);
  ~SplitServer();
  SplitServer(const SplitServer&) = delete;
  SplitServer& operator=(const SplitServer&) = delete;

  /// Unmasks and stores one client's embedding batch. A second upload
  /// from the same client raises ProtocolError.
  void receive_upload(const RoundMessage& msg);
  bool has_all_uploads() const;
  std::size_t stored_examples() const;
  /// Recovered split activations of one client's example.
  const Tensor& embedding(std::uint32_t client, std::size_t example) const;

  /// One minibatch step over all stored activations; returns the loss.
  double train_step();

  /// Answers one masked query frame with a masked prediction frame.
  RoundMessage predict(const RoundMessage& query);

  const Adapters& adapters() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace slicefl
