// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/orchestrator.hpp"

#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "slicefl/errors.hpp"
#include "slicefl/ops.hpp"

namespace slicefl {

void FedConfig::validate() const {
  model.validate();
  cost.validate();
  if (rounds == 0) throw ContractError("rounds must be >= 1");
  if (local_steps == 0) throw ContractError("local_steps must be >= 1");
  if (batch_size == 0) throw ContractError("batch_size must be >= 1");
  if (!(lr >= 0.0)) throw ContractError("learning rate must be >= 0");
  if (!(wire_scale > 0.0)) throw ContractError("wire_scale must be > 0");
  if (!(mask.scale > 0.0)) throw ContractError("mask scale must be > 0");
  if (method == Method::Method2) {
    if (split_layer >= model.n_layers) {
      throw ContractError("split_layer must be below n_layers");
    }
    if (!(tuning.qkv_ratio > 0.0 && tuning.qkv_ratio <= 1.0) ||
        !(tuning.dense_ratio > 0.0 && tuning.dense_ratio <= 1.0)) {
      throw ContractError("SPF ratios must lie in (0, 1]");
    }
  } else if (tuning.mode != TuningMode::Lora && tuning.mode != TuningMode::PtuningV2) {
    throw ContractError(std::string(to_string(method)) + " tunes with lora or ptuningv2");
  }
}

nlohmann::json FedConfig::to_json() const {
  return {
      {"method", to_string(method)},
      {"model",
       {{"n_layers", model.n_layers},
        {"d_model", model.d_model},
        {"n_heads", model.n_heads},
        {"d_head", model.d_head},
        {"d_ff", model.d_ff},
        {"vocab", model.vocab},
        {"n_classes", model.n_classes},
        {"max_seq", model.max_seq}}},
      {"tuning",
       {{"mode", to_string(tuning.mode)},
        {"lora_rank", tuning.lora_rank},
        {"lora_alpha", tuning.lora_alpha},
        {"lora_dropout", tuning.lora_dropout},
        {"prefix_len", tuning.prefix_len},
        {"qkv_ratio", tuning.qkv_ratio},
        {"dense_ratio", tuning.dense_ratio}}},
      {"rounds", rounds},
      {"local_steps", local_steps},
      {"batch_size", batch_size},
      {"lr", lr},
      {"seed", seed},
      {"precision", to_string(precision)},
      {"split_layer", split_layer},
      {"server_steps", server_steps},
      {"mask_scale", mask.scale},
      {"wire_scale", wire_scale},
      {"cost", cost.to_json()},
  };
}

nlohmann::json TrainingReport::to_json() const {
  double sum = 0, sq = 0;
  for (const auto& [name, t] : final_params) {
    for (double v : t.values()) {
      sum += v;
      sq += v * v;
    }
  }
  nlohmann::json msgs = nlohmann::json::object();
  for (const auto& [kind, n] : messages) msgs[kind] = n;
  return {
      {"method", to_string(method)},
      {"tuning", to_string(tuning)},
      {"precision", to_string(precision)},
      {"clients", clients},
      {"rounds", rounds},
      {"seed", seed},
      {"trainable_params", trainable_params},
      {"round_losses", round_losses},
      {"step_losses", step_losses},
      {"eval", {{"accuracy", eval.accuracy}, {"loss", eval.loss}}},
      {"audit", audit.to_json()},
      {"cost", cost.to_json()},
      {"pads", pads},
      {"messages", msgs},
      {"server_parameter_messages", server_parameter_messages},
      {"params_checksum", {{"sum", sum}, {"sum_sq", sq}}},
  };
}

namespace {

Workload workload_for(const FedConfig& config, const FederatedData& data,
                      const TuningConfig& tuning) {
  Workload w;
  w.training = true;
  w.tuning = tuning;
  const Dataset& probe = data.test.empty() ? data.shards.at(0) : data.test;
  w.seq_len = probe.empty() ? config.model.max_seq : probe.front().tokens.size();
  return w;
}

void fill_messages(TrainingReport& r, const Network& net) {
  for (const Network::LogEntry& e : net.log()) {
    ++r.messages[std::string(to_string(e.kind))];
    if (e.sender == kServerId &&
        (e.kind == MessageKind::GlobalBroadcast || e.kind == MessageKind::AdapterUpdate)) {
      ++r.server_parameter_messages;
    }
  }
}

void record_trusted(Trace& trace, const std::string& site) {
  TraceEvent ev;
  ev.site = site;
  ev.party = party_name(kServerId);
  ev.domain = TrustDomain::Trusted;
  trace.record(std::move(ev));
}

/// Runs fn(k) for k in [0, n) on n threads and rethrows the first failure.
void parallel_for(std::size_t n, Precision precision, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  threads.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    threads.emplace_back([&, k] {
      PrecisionScope scope(precision);
      try {
        fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::size_t argmax(const Tensor& t) {
  auto v = t.values();
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct Wire {
  std::unique_ptr<PadChannel> client_up, client_down, server_up, server_down;

  Wire(const FedConfig& c, std::uint32_t k, bool masked) {
    if (!masked) return;
    using D = PadChannel::Direction;
    client_up = std::make_unique<PadChannel>(c.seed, k, D::Upload, c.wire_scale);
    server_up = std::make_unique<PadChannel>(c.seed, k, D::Upload, c.wire_scale);
    client_down = std::make_unique<PadChannel>(c.seed, k, D::Download, c.wire_scale);
    server_down = std::make_unique<PadChannel>(c.seed, k, D::Download, c.wire_scale);
  }
};

class WireTap {
 public:
  explicit WireTap(const RunHooks& hooks) : hooks_(hooks) {}
  void operator()(const RoundMessage& msg, const NamedTensors& plain) {
    if (!hooks_.on_wire) return;
    std::lock_guard lock(mu_);
    hooks_.on_wire(msg, plain);
  }

 private:
  const RunHooks& hooks_;
  std::mutex mu_;
};

TrainingReport run_federated(const FedConfig& config, const FederatedData& data, Method method,
                             const RunHooks& hooks) {
  FedConfig cfg = config;
  cfg.method = method;
  cfg.validate();
  const std::size_t n_clients = data.shards.size();
  if (n_clients == 0) throw ContractError("federation needs at least one client");
  PrecisionScope precision(cfg.precision);

  const BaseModel base = BaseModel::random(cfg.model, cfg.seed);
  const PartitionPlan plan = build_plan(cfg.model, method);
  Trace trace(cfg.keep_trace);
  PadLedger ledger;
  Network net(&trace);
  WireTap tap(hooks);
  const bool masked = plan.masks_wire();

  const Adapters init = Adapters::create(base, cfg.tuning, cfg.seed);
  GlobalModel global{init.clone().named_parameters(), 0};

  struct Client {
    std::unique_ptr<LocalTrainer> trainer;
    std::unique_ptr<PadSource> pads;
    std::unique_ptr<SecureBackend> backend;
    Wire wire;
    std::vector<double> losses;
  };
  std::vector<Client> clients;
  const LocalTrainer::Options opts{AdamOptions{.lr = cfg.lr}, cfg.batch_size};
  std::uint64_t n_total = 0;
  for (std::size_t i = 0; i < n_clients; ++i) {
    const auto k = static_cast<std::uint32_t>(i + 1);
    Client c{std::make_unique<LocalTrainer>(base, init.clone(), data.shards[i], opts, cfg.seed, k),
             std::make_unique<PadSource>(cfg.seed, k, &ledger), nullptr, Wire(cfg, k, masked), {}};
    c.backend = std::make_unique<SecureBackend>(plan, party_name(k), *c.pads, trace, cfg.secure);
    n_total += c.trainer->size();
    clients.push_back(std::move(c));
  }

  TrainingReport report;
  auto broadcast = [&](std::uint32_t round) {
    for (std::size_t i = 0; i < n_clients; ++i) {
      const auto k = static_cast<std::uint32_t>(i + 1);
      RoundMessage msg = seal(MessageKind::GlobalBroadcast, kServerId, k, round, 0, global.params,
                              clients[i].wire.server_down.get(), &ledger);
      tap(msg, global.params);
      net.send(msg);
    }
  };
  auto receive_broadcast = [&](std::size_t i) {
    Client& c = clients[i];
    std::optional<RoundMessage> msg = net.receive(static_cast<std::uint32_t>(i + 1));
    if (!msg || msg->kind != MessageKind::GlobalBroadcast) {
      throw ProtocolError("client " + std::to_string(i + 1) + " missed the broadcast");
    }
    c.trainer->load(open(*msg, c.wire.client_down.get()));
  };

  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    const auto r32 = static_cast<std::uint32_t>(round);
    broadcast(r32);
    parallel_for(n_clients, cfg.precision, [&](std::size_t i) {
      Client& c = clients[i];
      receive_broadcast(i);
      c.losses.clear();
      for (std::size_t s = 0; s < cfg.local_steps; ++s) c.losses.push_back(c.trainer->step(*c.backend));
      const NamedTensors params = c.trainer->parameters();
      RoundMessage up = seal(MessageKind::AdapterUpdate, c.trainer->client(), kServerId, r32,
                             c.trainer->size(), params, c.wire.client_up.get(), &ledger);
      tap(up, params);
      net.send(up);
    });

    std::vector<RoundMessage> updates;
    while (std::optional<RoundMessage> msg = net.receive(kServerId)) {
      if (msg->sender == kServerId || msg->sender > n_clients) {
        throw ProtocolError("frame from unknown sender " + std::to_string(msg->sender));
      }
      RoundMessage plain = *msg;
      plain.masked = false;
      const NamedTensors params = open(*msg, clients[msg->sender - 1].wire.server_up.get());
      for (std::size_t j = 0; j < params.size(); ++j) {
        plain.payload[j] = {params[j].first, params[j].second, 0};
      }
      record_trusted(trace, "unmask");
      updates.push_back(std::move(plain));
    }
    global = aggregate(updates, n_clients, round + 1, &trace);
    if (hooks.on_aggregate) hooks.on_aggregate(round, updates, global);

    double round_loss = 0;
    for (const Client& c : clients) {
      double mean = 0;
      for (double l : c.losses) mean += l;
      mean /= static_cast<double>(c.losses.size());
      round_loss += static_cast<double>(c.trainer->size()) / static_cast<double>(n_total) * mean;
    }
    report.round_losses.push_back(round_loss);
    for (std::size_t s = 0; s < cfg.local_steps; ++s) {
      double mean = 0;
      for (const Client& c : clients) mean += c.losses[s];
      report.step_losses.push_back(mean / static_cast<double>(n_clients));
    }
  }

  // Final global model goes out once more so clients can serve it.
  broadcast(static_cast<std::uint32_t>(cfg.rounds));
  for (std::size_t i = 0; i < n_clients; ++i) receive_broadcast(i);
  report.eval = clients[0].trainer->evaluate(*clients[0].backend, data.test);

  report.method = method;
  report.tuning = cfg.tuning.mode;
  report.precision = cfg.precision;
  report.clients = n_clients;
  report.rounds = cfg.rounds;
  report.seed = cfg.seed;
  report.trainable_params = count_trainable_params(clients[0].trainer->adapters());
  report.audit = audit_taint(trace);
  report.cost = simulate_cost(plan, cfg.model, workload_for(cfg, data, cfg.tuning), cfg.cost);
  report.pads = ledger.to_json();
  fill_messages(report, net);
  report.final_params = global.params;
  if (cfg.keep_trace) report.trace_events = trace.events();
  return report;
}

TuningConfig split_tuning(const FedConfig& c) {
  TuningConfig t = c.tuning;
  t.mode = TuningMode::Spf;
  t.first_layer = c.split_layer;
  return t;
}

}  // namespace

TrainingReport run_method1(const FedConfig& config, const FederatedData& data,
                           const RunHooks& hooks) {
  return run_federated(config, data, Method::Method1, hooks);
}

TrainingReport run_baseline(const FedConfig& config, const FederatedData& data, Method mode,
                            const RunHooks& hooks) {
  if (mode != Method::Plaintext && mode != Method::Swmt) {
    throw ContractError("baselines are fl-llm and swmt");
  }
  return run_federated(config, data, mode, hooks);
}

TrainingReport run(const FedConfig& config, const FederatedData& data, const RunHooks& hooks) {
  switch (config.method) {
    case Method::Method1: return run_method1(config, data, hooks);
    case Method::Method2: return run_method2(config, data, hooks);
    case Method::Swmt:
    case Method::Plaintext: return run_baseline(config, data, config.method, hooks);
  }
  throw ContractError("unknown method");
}

TrainingReport run_centralized(const FedConfig& config, const Dataset& train,
                               const Dataset& test) {
  if (config.method == Method::Method2) {
    throw ContractError("the centralized reference covers method1, swmt and fl-llm");
  }
  config.validate();
  PrecisionScope precision(config.precision);
  const BaseModel base = BaseModel::random(config.model, config.seed);
  const PartitionPlan plan = build_plan(config.model, config.method);
  Trace trace(config.keep_trace);
  PadLedger ledger;
  const Adapters init = Adapters::create(base, config.tuning, config.seed);
  LocalTrainer trainer(base, init.clone(), train,
                       LocalTrainer::Options{AdamOptions{.lr = config.lr}, config.batch_size},
                       config.seed, 1);
  PadSource pads(config.seed, 1, &ledger);
  SecureBackend backend(plan, party_name(1), pads, trace, config.secure);

  TrainingReport r;
  for (std::size_t s = 0; s < config.rounds * config.local_steps; ++s) {
    r.step_losses.push_back(trainer.step(backend));
  }
  r.eval = trainer.evaluate(backend, test);
  r.method = config.method;
  r.tuning = config.tuning.mode;
  r.precision = config.precision;
  r.clients = 1;
  r.rounds = config.rounds;
  r.seed = config.seed;
  r.trainable_params = count_trainable_params(trainer.adapters());
  r.audit = audit_taint(trace);
  r.pads = ledger.to_json();
  r.final_params = trainer.parameters();
  return r;
}

// --------------------------------------------------------------- Method2 ---

struct SplitServer::Impl {
  const FedConfig& config;
  const BaseModel& base;
  std::size_t clients;
  Network& net;
  Trace& trace;
  PadLedger& ledger;
  PartitionPlan plan;
  PadSource pads;
  SecureBackend backend;
  Adapters adapters;
  Adam optimizer;
  Rng dropout;
  std::map<std::uint32_t, std::vector<Tensor>> store;
  std::map<std::uint32_t, std::vector<std::uint32_t>> labels;
  std::map<std::uint32_t, std::unique_ptr<PadChannel>> up, down;
  std::vector<std::pair<std::uint32_t, std::size_t>> index;
  std::optional<Batcher> batcher;

  Impl(const FedConfig& c, const BaseModel& b, std::size_t k, Network& n, Trace& t, PadLedger& l)
      : config(c),
        base(b),
        clients(k),
        net(n),
        trace(t),
        ledger(l),
        plan(build_plan(c.model, Method::Method2, c.split_layer)),
        pads(c.seed, kServerId, &l),
        backend(plan, party_name(kServerId), pads, t, c.secure),
        adapters(Adapters::create(b, split_tuning(c), c.seed)),
        optimizer(adapters.parameters(), AdamOptions{.lr = c.lr}),
        dropout(c.seed, stream_id("dropout", kServerId)) {
    using D = PadChannel::Direction;
    for (std::uint32_t id = 1; id <= k; ++id) {
      up[id] = std::make_unique<PadChannel>(c.seed, id, D::Upload, c.wire_scale);
      down[id] = std::make_unique<PadChannel>(c.seed, id, D::Download, c.wire_scale);
    }
  }

  void check_sender(const RoundMessage& msg) const {
    if (msg.sender == kServerId || msg.sender > clients) {
      throw ProtocolError("frame from unknown sender " + std::to_string(msg.sender));
    }
    if (!msg.masked) throw ProtocolError("split activations must arrive masked");
  }

  Tensor logits(const Tensor& e, Rng* rng) {
    const Transformer model(base, adapters);
    return model.classify(
        model.forward_layers(e, config.split_layer, config.model.n_layers, backend, rng), backend);
  }
};

SplitServer::SplitServer(const FedConfig& config, const BaseModel& base, std::size_t clients,
                         Network& network, Trace& trace, PadLedger& ledger)
    : impl_(std::make_unique<Impl>(config, base, clients, network, trace, ledger)) {}

SplitServer::~SplitServer() = default;

void SplitServer::receive_upload(const RoundMessage& msg) {
  Impl& s = *impl_;
  if (msg.kind != MessageKind::EmbeddingBatch) {
    throw ProtocolError("expected an embedding batch, got " + std::string(to_string(msg.kind)));
  }
  s.check_sender(msg);
  if (s.store.count(msg.sender)) {
    throw ProtocolError(party_name(msg.sender) + " uploaded its embeddings twice");
  }
  if (s.batcher) throw ProtocolError("upload after server training started");
  const NamedTensors plain = open(msg, s.up.at(msg.sender).get());
  record_trusted(s.trace, "unmask");
  std::vector<Tensor> embeddings;
  std::vector<std::uint32_t> labels;
  for (const auto& [name, t] : plain) {
    if (name == "labels") {
      for (double v : t.values()) labels.push_back(static_cast<std::uint32_t>(std::lround(v)));
    } else {
      embeddings.push_back(t);
    }
  }
  if (embeddings.size() != labels.size() || embeddings.size() != msg.n_k) {
    throw ProtocolError("embedding batch from " + party_name(msg.sender) +
                        " disagrees with its n_k");
  }
  for (std::uint32_t label : labels) {
    if (label >= s.config.model.n_classes) throw ProtocolError("label outside the class range");
  }
  s.store[msg.sender] = std::move(embeddings);
  s.labels[msg.sender] = std::move(labels);
}

bool SplitServer::has_all_uploads() const { return impl_->store.size() == impl_->clients; }

std::size_t SplitServer::stored_examples() const {
  std::size_t n = 0;
  for (const auto& [k, v] : impl_->store) n += v.size();
  return n;
}

const Tensor& SplitServer::embedding(std::uint32_t client, std::size_t example) const {
  return impl_->store.at(client).at(example);
}

double SplitServer::train_step() {
  Impl& s = *impl_;
  if (!s.batcher) {
    if (!has_all_uploads()) throw ProtocolError("training before every client uploaded");
    for (const auto& [k, v] : s.store) {
      for (std::size_t i = 0; i < v.size(); ++i) s.index.emplace_back(k, i);
    }
    s.batcher.emplace(s.index.size(), Rng(s.config.seed, stream_id("batch", kServerId)));
  }
  const std::vector<std::size_t> batch = s.batcher->next(s.config.batch_size);
  return optimize_step(s.optimizer, [&] {
    std::vector<Tensor> logits;
    std::vector<std::uint32_t> labels;
    for (std::size_t b : batch) {
      const auto [k, i] = s.index[b];
      logits.push_back(s.logits(s.store.at(k)[i], &s.dropout));
      labels.push_back(s.labels.at(k)[i]);
    }
    s.backend.note("loss", OpClass::Loss);
    return batch_loss(logits, labels);
  });
}

RoundMessage SplitServer::predict(const RoundMessage& query) {
  Impl& s = *impl_;
  if (query.kind != MessageKind::Query) throw ProtocolError("predict needs a query frame");
  s.check_sender(query);
  const NamedTensors plain = open(query, s.up.at(query.sender).get());
  record_trusted(s.trace, "unmask");
  NamedTensors out;
  for (std::size_t i = 0; i < plain.size(); ++i) {
    out.emplace_back("logits/" + std::to_string(i), s.logits(plain[i].second, nullptr).detach());
  }
  return seal(MessageKind::Prediction, kServerId, query.sender, query.round, out.size(), out,
              s.down.at(query.sender).get(), &s.ledger);
}

const Adapters& SplitServer::adapters() const { return impl_->adapters; }

TrainingReport run_method2(const FedConfig& config, const FederatedData& data,
                           const RunHooks& hooks) {
  FedConfig cfg = config;
  cfg.method = Method::Method2;
  cfg.validate();
  const std::size_t n_clients = data.shards.size();
  if (n_clients == 0) throw ContractError("federation needs at least one client");
  PrecisionScope precision(cfg.precision);

  const BaseModel base = BaseModel::random(cfg.model, cfg.seed);
  const PartitionPlan plan = build_plan(cfg.model, Method::Method2, cfg.split_layer);
  Trace trace(cfg.keep_trace);
  PadLedger ledger;
  Network net(&trace);
  WireTap tap(hooks);
  SplitServer server(cfg, base, n_clients, net, trace, ledger);

  const Adapters frozen;  // the client half has nothing to tune
  const Transformer client_model(base, frozen);
  struct Client {
    std::unique_ptr<PadSource> pads;
    std::unique_ptr<SecureBackend> backend;
    Wire wire;
    std::vector<Tensor> plain;
  };
  std::vector<Client> clients;
  for (std::size_t i = 0; i < n_clients; ++i) {
    const auto k = static_cast<std::uint32_t>(i + 1);
    Client c{std::make_unique<PadSource>(cfg.seed, k, &ledger), nullptr, Wire(cfg, k, true), {}};
    c.backend = std::make_unique<SecureBackend>(plan, party_name(k), *c.pads, trace, cfg.secure);
    clients.push_back(std::move(c));
  }
  auto split_activations = [&](Client& c, const std::vector<std::uint32_t>& tokens) {
    const Tensor x = client_model.embed(tokens, *c.backend);
    return client_model.forward_layers(x, 0, cfg.split_layer, *c.backend).detach();
  };

  // Phase 1: every client computes E_f once, offline, and uploads it masked.
  parallel_for(n_clients, cfg.precision, [&](std::size_t i) {
    Client& c = clients[i];
    const Dataset& shard = data.shards[i];
    NamedTensors tensors;
    std::vector<double> labels;
    for (std::size_t j = 0; j < shard.size(); ++j) {
      c.plain.push_back(split_activations(c, shard[j].tokens));
      tensors.emplace_back("E_f/" + std::to_string(j), c.plain.back());
      labels.push_back(shard[j].label);
    }
    tensors.emplace_back("labels", Tensor({labels.size()}, labels));
    RoundMessage up = seal(MessageKind::EmbeddingBatch, static_cast<std::uint32_t>(i + 1),
                           kServerId, 0, shard.size(), tensors, c.wire.client_up.get(), &ledger);
    tap(up, tensors);
    net.send(up);
  });

  // Phase 2: the server enclave unmasks and trains the upper layers.
  while (std::optional<RoundMessage> msg = net.receive(kServerId)) server.receive_upload(*msg);
  if (hooks.on_embeddings) {
    for (std::size_t i = 0; i < n_clients; ++i) {
      for (std::size_t j = 0; j < clients[i].plain.size(); ++j) {
        const auto k = static_cast<std::uint32_t>(i + 1);
        hooks.on_embeddings(k, j, clients[i].plain[j], server.embedding(k, j));
      }
    }
  }
  TrainingReport report;
  for (std::size_t s = 0; s < cfg.server_steps; ++s) report.step_losses.push_back(server.train_step());

  // Serving: client 1 queries the test set through the enclave.
  if (!data.test.empty()) {
    Client& c = clients[0];
    NamedTensors query;
    for (std::size_t j = 0; j < data.test.size(); ++j) {
      query.emplace_back("E_f/" + std::to_string(j), split_activations(c, data.test[j].tokens));
    }
    RoundMessage q = seal(MessageKind::Query, 1, kServerId, 0, query.size(), query,
                          c.wire.client_up.get(), &ledger);
    tap(q, query);
    net.send(q);
    const RoundMessage answer = server.predict(*net.receive(kServerId));
    net.send(answer);
    const NamedTensors logits = open(*net.receive(1), c.wire.client_down.get());
    tap(answer, logits);
    std::size_t correct = 0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
      correct += argmax(logits[j].second) == data.test[j].label;
      report.eval.loss += cross_entropy(logits[j].second, data.test[j].label).item();
    }
    report.eval.accuracy = static_cast<double>(correct) / static_cast<double>(logits.size());
    report.eval.loss /= static_cast<double>(logits.size());
  }

  report.method = Method::Method2;
  report.tuning = TuningMode::Spf;
  report.precision = cfg.precision;
  report.clients = n_clients;
  report.rounds = 1;
  report.seed = cfg.seed;
  report.trainable_params = count_trainable_params(server.adapters());
  report.audit = audit_taint(trace);
  report.cost = simulate_cost(plan, cfg.model, workload_for(cfg, data, split_tuning(cfg)), cfg.cost);
  report.pads = ledger.to_json();
  fill_messages(report, net);
  report.final_params = server.adapters().named_parameters();
  if (cfg.keep_trace) report.trace_events = trace.events();
  return report;
}

}  // namespace slicefl
