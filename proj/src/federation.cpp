// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/federation.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "slicefl/errors.hpp"
#include "slicefl/ops.hpp"

namespace slicefl {

GlobalModel aggregate(const std::vector<RoundMessage>& updates, std::size_t expected_clients,
                      std::size_t round, Trace* trace) {
  std::vector<const RoundMessage*> by_client(expected_clients + 1, nullptr);
  for (const RoundMessage& m : updates) {
    if (m.kind != MessageKind::AdapterUpdate) {
      throw ProtocolError("aggregate got a " + std::string(to_string(m.kind)) + " message");
    }
    if (m.masked) throw ProtocolError("aggregate needs updates unmasked inside the enclave");
    if (m.sender == kServerId || m.sender > expected_clients) {
      throw ProtocolError("update from unexpected sender " + party_name(m.sender));
    }
    if (by_client[m.sender]) throw ProtocolError("duplicate update from " + party_name(m.sender));
    if (m.n_k == 0) throw ProtocolError("update from " + party_name(m.sender) + " has n_k = 0");
    by_client[m.sender] = &m;
  }
  for (std::size_t k = 1; k <= expected_clients; ++k) {
    if (!by_client[k]) {
      throw ProtocolError("missing update from " + party_name(static_cast<std::uint32_t>(k)));
    }
  }
  if (expected_clients == 0) throw ProtocolError("aggregate over zero clients");

  std::uint64_t n = 0;
  for (std::size_t k = 1; k <= expected_clients; ++k) n += by_client[k]->n_k;

  const RoundMessage& first = *by_client[1];
  GlobalModel g;
  g.round = round;
  for (const WireTensor& t : first.payload) {
    g.params.emplace_back(t.name, Tensor(t.value.shape()));
  }
  for (std::size_t k = 1; k <= expected_clients; ++k) {
    const RoundMessage& m = *by_client[k];
    if (m.payload.size() != first.payload.size()) {
      throw ProtocolError("update from " + party_name(m.sender) + " has a different layout");
    }
    const double w = static_cast<double>(m.n_k) / static_cast<double>(n);
    for (std::size_t i = 0; i < m.payload.size(); ++i) {
      const WireTensor& t = m.payload[i];
      if (t.name != g.params[i].first || t.value.shape() != g.params[i].second.shape()) {
        throw ProtocolError("update from " + party_name(m.sender) + " mismatches tensor '" +
                            g.params[i].first + "'");
      }
      auto dst = g.params[i].second.mutable_values();
      auto src = t.value.values();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * src[j];
    }
  }
  if (trace) {
    TraceEvent ev;
    ev.site = "aggregate";
    ev.party = party_name(kServerId);
    ev.domain = TrustDomain::Trusted;
    trace->record(std::move(ev));
  }
  return g;
}

Batcher::Batcher(std::size_t n, Rng rng) : n_(n), rng_(std::move(rng)) {
  if (n_ == 0) throw ContractError("cannot sample from an empty dataset");
  order_.resize(n_);
  reshuffle();
}

void Batcher::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  for (std::size_t i = n_; i > 1; --i) {
    std::swap(order_[i - 1], order_[rng_.below(i)]);
  }
  pos_ = 0;
}

std::vector<std::size_t> Batcher::next(std::size_t batch_size) {
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  while (out.size() < batch_size) {
    if (pos_ == n_) reshuffle();
    out.push_back(order_[pos_++]);
  }
  return out;
}

double optimize_step(Adam& optimizer, const std::function<Tensor()>& loss_fn) {
  optimizer.zero_grad();
  const Tensor loss = loss_fn();
  backward(loss);
  optimizer.step();
  return loss.item();
}

Tensor batch_loss(const std::vector<Tensor>& logits, const std::vector<std::uint32_t>& labels) {
  if (logits.empty() || logits.size() != labels.size()) {
    throw ContractError("batch_loss needs one label per logits row");
  }
  Tensor total = cross_entropy(logits[0], labels[0]);
  for (std::size_t i = 1; i < logits.size(); ++i) {
    total = add(total, cross_entropy(logits[i], labels[i]));
  }
  return scale(total, 1.0 / static_cast<double>(logits.size()));
}

LocalTrainer::LocalTrainer(const BaseModel& base, Adapters adapters, Dataset data,
                           Options options, std::uint64_t seed, std::uint32_t client)
    : base_(base),
      adapters_(std::move(adapters)),
      data_(std::move(data)),
      options_(options),
      optimizer_(adapters_.parameters(), options.adam),
      batcher_(data_.empty() ? throw ContractError("client " + std::to_string(client) +
                                                   " has an empty dataset")
                             : data_.size(),
               Rng(seed, stream_id("batch", client))),
      dropout_rng_(seed, stream_id("dropout", client)),
      client_(client) {}

double LocalTrainer::step(Backend& backend) {
  const Transformer model(base_, adapters_);
  const std::vector<std::size_t> batch = batcher_.next(options_.batch_size);
  return optimize_step(optimizer_, [&] {
    std::vector<Tensor> logits;
    std::vector<std::uint32_t> labels;
    for (std::size_t i : batch) {
      logits.push_back(model.logits(data_[i].tokens, backend, &dropout_rng_));
      labels.push_back(data_[i].label);
    }
    backend.note("loss", OpClass::Loss);
    return batch_loss(logits, labels);
  });
}

EvalResult LocalTrainer::evaluate(Backend& backend, const Dataset& data) const {
  return slicefl::evaluate(Transformer(base_, adapters_), backend, data);
}

EvalResult evaluate(const Transformer& model, Backend& backend, const Dataset& data) {
  EvalResult r;
  if (data.empty()) return r;
  std::size_t correct = 0;
  for (const Example& ex : data) {
    const Tensor logits = model.logits(ex.tokens, backend).detach();
    auto v = logits.values();
    const auto best = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    correct += best == ex.label;
    r.loss += cross_entropy(logits, ex.label).item();
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  r.loss /= static_cast<double>(data.size());
  return r;
}

}  // namespace slicefl
