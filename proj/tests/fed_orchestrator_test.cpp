// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "slicefl/errors.hpp"
#include "slicefl/federation.hpp"
#include "slicefl/ops.hpp"
#include "slicefl/orchestrator.hpp"
#include "slicefl/wire.hpp"
#include "test_util.hpp"

namespace slicefl {
namespace {

using testing::random_tensor;
using testing::rel_err;

RoundMessage random_message(Rng& rng) {
  RoundMessage m;
  m.sender = 3;
  m.receiver = kServerId;
  m.round = 7;
  m.kind = MessageKind::AdapterUpdate;
  m.n_k = 123456789012ull;
  m.masked = true;
  m.payload.push_back({"L0.qkv.lora_a", random_tensor({2, 5}, rng), 99});
  m.payload.push_back({"head.b", random_tensor({4}, rng), (1ull << 63) | 5});
  return m;
}

TEST(Frame, RoundTripIsExact) {
  Rng rng(1, 0);
  const RoundMessage m = random_message(rng);
  const auto bytes = encode_frame(m);
  const RoundMessage d = decode_frame(bytes);
  EXPECT_EQ(d.sender, m.sender);
  EXPECT_EQ(d.round, m.round);
  EXPECT_EQ(d.kind, m.kind);
  EXPECT_EQ(d.n_k, m.n_k);
  EXPECT_TRUE(d.masked);
  ASSERT_EQ(d.payload.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(d.payload[i].name, m.payload[i].name);
    EXPECT_EQ(d.payload[i].pad_id, m.payload[i].pad_id);
    EXPECT_EQ(d.payload[i].value.shape(), m.payload[i].value.shape());
    EXPECT_EQ(testing::to_vec(d.payload[i].value.values()),
              testing::to_vec(m.payload[i].value.values()));
  }
  // Leading length field counts everything after itself.
  const std::uint32_t len = bytes[0] | bytes[1] << 8 | bytes[2] << 16 | bytes[3] << 24;
  EXPECT_EQ(len + 4u, bytes.size());
  EXPECT_EQ(bytes[4], 'S');
  EXPECT_EQ(bytes[7], '1');
}

TEST(Frame, MalformedFramesRejected) {
  Rng rng(2, 0);
  const auto good = encode_frame(random_message(rng));
  auto truncated = good;
  truncated.pop_back();
  EXPECT_THROW(decode_frame(truncated), FormatError);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(decode_frame(trailing), FormatError);
  auto magic = good;
  magic[5] ^= 1;
  EXPECT_THROW(decode_frame(magic), FormatError);
  auto version = good;
  version[8] = 9;
  EXPECT_THROW(decode_frame(version), FormatError);
  auto kind = good;
  kind[10] = 77;
  EXPECT_THROW(decode_frame(kind), FormatError);
  EXPECT_THROW(decode_frame(std::vector<std::uint8_t>{1, 2}), FormatError);
}

TEST(Seal, MaskedRoundTripAndChannelChecks) {
  Rng rng(3, 0);
  const NamedTensors t = {{"a", random_tensor({3, 3}, rng)}, {"b", random_tensor({2}, rng)}};
  using D = PadChannel::Direction;
  PadChannel tx(5, 1, D::Upload, 4.0), rx(5, 1, D::Upload, 4.0);
  PadLedger ledger;
  const RoundMessage m = seal(MessageKind::AdapterUpdate, 1, kServerId, 0, 10, t, &tx, &ledger);
  EXPECT_TRUE(m.masked);
  EXPECT_GT(rel_err(m.payload[0].value, t[0].second), 0.1);
  const NamedTensors back = open(m, &rx);
  EXPECT_LT(rel_err(back[0].second, t[0].second), 1e-14);
  EXPECT_LT(rel_err(back[1].second, t[1].second), 1e-14);
  EXPECT_EQ(ledger.used(), 2u);
  // Replaying the same frame is out of step with the receiving channel.
  EXPECT_THROW(open(m, &rx), ProtocolError);
  EXPECT_THROW(open(m, nullptr), ProtocolError);
  const RoundMessage plain = seal(MessageKind::AdapterUpdate, 1, kServerId, 0, 10, t, nullptr);
  EXPECT_FALSE(plain.masked);
  EXPECT_THROW(open(plain, &rx), ProtocolError);
  EXPECT_EQ(testing::to_vec(open(plain, nullptr)[0].second.values()),
            testing::to_vec(t[0].second.values()));
}

TEST(Network, DeliversInOrderAndLogs) {
  Trace trace;
  Network net(&trace);
  Rng rng(4, 0);
  RoundMessage a = random_message(rng), b = random_message(rng);
  b.round = 8;
  net.send(a);
  net.send(b);
  EXPECT_EQ(net.pending(kServerId), 2u);
  EXPECT_EQ(net.receive(kServerId)->round, 7u);
  EXPECT_EQ(net.receive(kServerId)->round, 8u);
  EXPECT_FALSE(net.receive(kServerId));
  EXPECT_EQ(net.count(MessageKind::AdapterUpdate, 3u), 2u);
  EXPECT_EQ(trace.summary().wire_messages, 2u);
  EXPECT_EQ(trace.summary().wire_masked, 2u);
}

// ---- aggregation ----

RoundMessage update(std::uint32_t client, std::uint64_t n_k, NamedTensors t) {
  return seal(MessageKind::AdapterUpdate, client, kServerId, 0, n_k, t, nullptr);
}

TEST(Aggregate, MatchesIndependentWeightedMean) {
  Rng rng(5, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng.below(5);
    std::vector<RoundMessage> ups;
    std::vector<std::uint64_t> n(k);
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < k; ++i) {
      n[i] = 1 + rng.below(100);
      total += n[i];
      ups.push_back(update(static_cast<std::uint32_t>(i + 1), n[i],
                           {{"w", random_tensor({3, 2}, rng)}, {"b", random_tensor({2}, rng)}}));
    }
    const GlobalModel g = aggregate(ups, k, 1);
    for (std::size_t t = 0; t < 2; ++t) {
      std::vector<double> oracle(ups[0].payload[t].value.numel(), 0.0);
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t e = 0; e < oracle.size(); ++e)
          oracle[e] += static_cast<double>(n[i]) / static_cast<double>(total) *
                       ups[i].payload[t].value.values()[e];
      EXPECT_LT(testing::rel_err(g.params[t].second.values(), oracle), 1e-14);
    }
  }
}

TEST(Aggregate, HandComputedCase) {
  const GlobalModel g = aggregate({update(1, 1, {{"w", Tensor::vector({2.0})}}),
                                   update(2, 3, {{"w", Tensor::vector({4.0})}})},
                                  2, 0);
  EXPECT_DOUBLE_EQ(g.params[0].second.values()[0], 3.5);
}

TEST(Aggregate, IdenticalUpdatesAreFixedPoint) {
  Rng rng(6, 0);
  const Tensor w = random_tensor({4, 4}, rng);
  const GlobalModel g =
      aggregate({update(1, 7, {{"w", w}}), update(2, 11, {{"w", w}}), update(3, 2, {{"w", w}})},
                3, 0);
  EXPECT_LT(rel_err(g.params[0].second, w), 1e-15);
}

TEST(Aggregate, IsLinearInUpdates) {
  Rng rng(7, 0);
  const Tensor a1 = random_tensor({3}, rng), a2 = random_tensor({3}, rng);
  const Tensor b1 = random_tensor({3}, rng), b2 = random_tensor({3}, rng);
  auto agg = [](const Tensor& x, const Tensor& y) {
    return aggregate({update(1, 3, {{"w", x}}), update(2, 5, {{"w", y}})}, 2, 0).params[0].second;
  };
  const Tensor lhs = agg(add(scale(a1, 2.0), b1), add(scale(a2, 2.0), b2));
  const Tensor rhs = add(scale(agg(a1, a2), 2.0), agg(b1, b2));
  EXPECT_LT(rel_err(lhs, rhs), 1e-14);
}

TEST(Aggregate, ProtocolErrors) {
  const Tensor w = Tensor::vector({1.0});
  EXPECT_THROW(aggregate({update(1, 1, {{"w", w}})}, 2, 0), ProtocolError);
  EXPECT_THROW(aggregate({update(1, 1, {{"w", w}}), update(1, 1, {{"w", w}})}, 2, 0),
               ProtocolError);
  EXPECT_THROW(aggregate({update(1, 0, {{"w", w}})}, 1, 0), ProtocolError);
  EXPECT_THROW(aggregate({update(3, 1, {{"w", w}})}, 1, 0), ProtocolError);
  EXPECT_THROW(aggregate({update(1, 1, {{"w", w}}), update(2, 1, {{"v", w}})}, 2, 0),
               ProtocolError);
  EXPECT_THROW(aggregate({update(1, 1, {{"w", w}}), update(2, 1, {{"w", Tensor({2})}})}, 2, 0),
               ProtocolError);
  RoundMessage wrong = update(1, 1, {{"w", w}});
  wrong.kind = MessageKind::Query;
  EXPECT_THROW(aggregate({wrong}, 1, 0), ProtocolError);
  RoundMessage masked = update(1, 1, {{"w", w}});
  masked.masked = true;
  EXPECT_THROW(aggregate({masked}, 1, 0), ProtocolError);
}

TEST(Batcher, CoversEveryIndexPerEpoch) {
  Batcher b(10, Rng(1, 0));
  std::vector<int> seen(10, 0);
  for (int i = 0; i < 5; ++i)
    for (std::size_t idx : b.next(2)) ++seen[idx];
  for (int c : seen) EXPECT_EQ(c, 1);
}

TEST(Optimizer, QuadraticConvergesToMinimizer) {
  Tensor w = Tensor::vector({5.0, -3.0}).set_requires_grad(true);
  const Tensor target = Tensor::vector({1.0, 2.0});
  Adam opt({w}, AdamOptions{.lr = 0.05});
  for (int i = 0; i < 2000; ++i) {
    optimize_step(opt, [&] {
      const Tensor d = sub(w, target);
      return sum(mul(d, d));
    });
  }
  EXPECT_NEAR(w.values()[0], 1.0, 1e-3);
  EXPECT_NEAR(w.values()[1], 2.0, 1e-3);
}

TEST(LocalTrainer, RejectsEmptyData) {
  const BaseModel base = BaseModel::random(TransformerConfig{}, 1);
  EXPECT_THROW(LocalTrainer(base, Adapters::create(base, TuningConfig{}, 1), {}, {}, 1, 1),
               ContractError);
}

// ---- end-to-end federation on a small task ----

struct SmallRun {
  FedConfig config;
  FederatedData data;
  explicit SmallRun(Method m, std::size_t clients = 3) {
    config.method = m;
    config.rounds = 2;
    config.local_steps = 2;
    config.server_steps = 20;
    TaskSpec spec;
    spec.n_train = 48;
    spec.n_test = 16;
    spec.clients = clients;
    data = gen_dataset(spec, 3);
  }
};

TEST(Federation, ZeroLearningRateLeavesAdaptersUntouched) {
  SmallRun r(Method::Plaintext);
  r.config.lr = 0.0;
  std::vector<NamedTensors> seen;
  RunHooks hooks;
  hooks.on_aggregate = [&](std::size_t, const std::vector<RoundMessage>& ups, const GlobalModel&) {
    for (const RoundMessage& m : ups) seen.push_back(open(m, nullptr));
  };
  const TrainingReport rep = run(r.config, r.data, hooks);
  ASSERT_EQ(seen.size(), 6u);
  for (const NamedTensors& s : seen)
    for (std::size_t t = 0; t < s.size(); ++t)
      EXPECT_LT(rel_err(s[t].second, rep.final_params[t].second), 1e-15);
}

TEST(Federation, AggregateHookMatchesOracleEachRound) {
  SmallRun r(Method::Method1);
  std::size_t rounds = 0;
  RunHooks hooks;
  hooks.on_aggregate = [&](std::size_t, const std::vector<RoundMessage>& ups,
                           const GlobalModel& g) {
    ++rounds;
    std::uint64_t total = 0;
    for (const RoundMessage& m : ups) total += m.n_k;
    for (std::size_t t = 0; t < g.params.size(); ++t) {
      std::vector<double> oracle(g.params[t].second.numel(), 0.0);
      for (const RoundMessage& m : ups)
        for (std::size_t e = 0; e < oracle.size(); ++e)
          oracle[e] += static_cast<double>(m.n_k) / static_cast<double>(total) *
                       m.payload[t].value.values()[e];
      EXPECT_LT(testing::rel_err(g.params[t].second.values(), oracle), 1e-14);
    }
  };
  const TrainingReport rep = run(r.config, r.data, hooks);
  EXPECT_EQ(rounds, 2u);
  EXPECT_TRUE(rep.audit.pass);
}

TEST(Federation, SingleClientEqualsCentralized) {
  SmallRun r(Method::Plaintext, 1);
  const TrainingReport fed = run(r.config, r.data);
  const TrainingReport central = run_centralized(r.config, r.data.shards[0], r.data.test);
  EXPECT_EQ(fed.step_losses, central.step_losses);
  ASSERT_EQ(fed.final_params.size(), central.final_params.size());
  for (std::size_t t = 0; t < fed.final_params.size(); ++t)
    EXPECT_EQ(testing::to_vec(fed.final_params[t].second.values()),
              testing::to_vec(central.final_params[t].second.values()));
}

TEST(Federation, Method1WireCarriesOnlyMaskedPayloads) {
  SmallRun r(Method::Method1);
  std::size_t frames = 0;
  RunHooks hooks;
  hooks.on_wire = [&](const RoundMessage& frame, const NamedTensors& plain) {
    ++frames;
    EXPECT_TRUE(frame.masked);
    for (std::size_t t = 0; t < plain.size(); ++t)
      for (std::size_t e = 0; e < plain[t].second.numel(); ++e)
        EXPECT_NE(frame.payload[t].value.values()[e], plain[t].second.values()[e]);
  };
  const TrainingReport rep = run(r.config, r.data, hooks);
  EXPECT_GT(frames, 0u);
  EXPECT_EQ(rep.pads["reused"], 0);
}

TEST(Federation, Method2ProtocolShape) {
  SmallRun r(Method::Method2);
  r.config.tuning.mode = TuningMode::Spf;
  double worst = 0;
  std::size_t seen = 0;
  RunHooks hooks;
  hooks.on_embeddings = [&](std::uint32_t, std::size_t, const Tensor& c, const Tensor& s) {
    ++seen;
    worst = std::max(worst, rel_err(s, c));
  };
  const TrainingReport rep = run(r.config, r.data, hooks);
  EXPECT_EQ(rep.messages.at("embedding_batch"), 3u);
  EXPECT_EQ(rep.server_parameter_messages, 0u);
  EXPECT_EQ(seen, r.data.total_train());
  EXPECT_LE(worst, 1e-12);
  EXPECT_TRUE(rep.audit.pass);
}

TEST(SplitServer, RefusesSecondUpload) {
  FedConfig c;
  c.method = Method::Method2;
  c.tuning.mode = TuningMode::Spf;
  const BaseModel base = BaseModel::random(c.model, c.seed);
  Trace trace;
  PadLedger ledger;
  Network net(&trace);
  SplitServer server(c, base, 2, net, trace, ledger);
  PadChannel up(c.seed, 1, PadChannel::Direction::Upload, c.wire_scale);
  const NamedTensors batch = {{"E_f/0", Tensor({4, 32})}, {"labels", Tensor::vector({1.0})}};
  const RoundMessage m = seal(MessageKind::EmbeddingBatch, 1, kServerId, 0, 1, batch, &up);
  server.receive_upload(m);
  EXPECT_EQ(server.stored_examples(), 1u);
  EXPECT_FALSE(server.has_all_uploads());
  EXPECT_THROW(server.receive_upload(m), ProtocolError);
}

TEST(FedConfig, ValidatesCombinations) {
  FedConfig c;
  c.tuning.mode = TuningMode::Spf;
  EXPECT_THROW(c.validate(), ContractError);
  c.method = Method::Method2;
  c.split_layer = 6;
  EXPECT_THROW(c.validate(), ContractError);
  c.split_layer = 4;
  c.tuning.qkv_ratio = 0.0;
  EXPECT_THROW(c.validate(), ContractError);
  c.tuning.qkv_ratio = 0.25;
  EXPECT_NO_THROW(c.validate());
}

}  // namespace
}  // namespace slicefl
