// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "slicefl/adapters.hpp"
#include "slicefl/checkpoint.hpp"
#include "slicefl/dataset.hpp"
#include "slicefl/model.hpp"
#include "slicefl/optim.hpp"
#include "slicefl/rng.hpp"
#include "slicefl/trace.hpp"
#include "slicefl/transformer.hpp"
#include "slicefl/wire.hpp"

namespace slicefl {

struct GlobalModel {
  NamedTensors params;
  std::size_t round = 0;
};

/// W' = sum_k (n_k / n) W_k over plaintext updates, accumulated in client
/// order. Needs exactly one AdapterUpdate from each of clients
/// 1..expected_clients with identical tensor names and shapes; anything
/// else raises ProtocolError. Records the aggregation as a trusted op.
GlobalModel aggregate(const std::vector<RoundMessage>& updates, std::size_t expected_clients,
                      std::size_t round, Trace* trace = nullptr);

/// Reshuffling sampler over [0, n): walks a fresh permutation per epoch.
class Batcher {
 public:
  Batcher(std::size_t n, Rng rng);
  std::vector<std::size_t> next(std::size_t batch_size);

 private:
  void reshuffle();

  std::size_t n_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

/// One optimizer step on loss_fn(); returns the loss value.
double optimize_step(Adam& optimizer, const std::function<Tensor()>& loss_fn);

/// Mean cross entropy of a minibatch.
Tensor batch_loss(const std::vector<Tensor>& logits, const std::vector<std::uint32_t>& labels);

struct EvalResult {
  double accuracy = 0;
  double loss = 0;
};

/// A client's replica of the fine-tuned parameters W_k and its local data.
/// Only adapter tensors require gradients; the base model is never
/// written. Optimizer moments persist across rounds.
class LocalTrainer {
 public:
  struct Options {
    AdamOptions adam;
    std::size_t batch_size = 8;
  };

  /// Throws ContractError for an empty dataset.
  LocalTrainer(const BaseModel& base, Adapters adapters, Dataset data, Options options,
               std::uint64_t seed, std::uint32_t client);
  LocalTrainer(const LocalTrainer&) = delete;
  LocalTrainer& operator=(const LocalTrainer&) = delete;

  /// One minibatch step through `backend`; returns the batch loss.
  double step(Backend& backend);

  EvalResult evaluate(Backend& backend, const Dataset& data) const;

  NamedTensors parameters() const { return adapters_.named_parameters(); }
  void load(const NamedTensors& params) { adapters_.load(params); }
  const Adapters& adapters() const { return adapters_; }
  std::size_t size() const { return data_.size(); }
  std::uint32_t client() const { return client_; }

 private:
  const BaseModel& base_;
  Adapters adapters_;
  Dataset data_;
  Options options_;
  Adam optimizer_;
  Batcher batcher_;
  Rng dropout_rng_;
  std::uint32_t client_;
};

EvalResult evaluate(const Transformer& model, Backend& backend, const Dataset& data);

}  // namespace slicefl
