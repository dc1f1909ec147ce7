// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/wire.hpp"

#include <algorithm>

#include "bytes.hpp"
#include "slicefl/errors.hpp"
#include "slicefl/precision.hpp"

namespace slicefl {

namespace {

constexpr std::uint32_t kMagic = 0x314C4653;  // "SFL1"
constexpr std::uint16_t kVersion = 1;
constexpr std::uint32_t kFlagMasked = 1;

}  // namespace

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::AdapterUpdate: return "adapter_update";
    case MessageKind::EmbeddingBatch: return "embedding_batch";
    case MessageKind::GlobalBroadcast: return "global_broadcast";
    case MessageKind::Query: return "query";
    case MessageKind::Prediction: return "prediction";
  }
  return "?";
}

std::string party_name(std::uint32_t id) {
  return id == kServerId ? "server" : "client" + std::to_string(id);
}

std::vector<std::uint8_t> encode_frame(const RoundMessage& msg) {
  detail::ByteWriter w;
  w.u32(0);
  w.u32(kMagic);
  w.u16(kVersion);
  w.u16(static_cast<std::uint16_t>(msg.kind));
  w.u32(msg.sender);
  w.u32(msg.receiver);
  w.u32(msg.round);
  w.u64(msg.n_k);
  w.u32(msg.masked ? kFlagMasked : 0);
  w.u32(static_cast<std::uint32_t>(msg.payload.size()));
  for (const WireTensor& t : msg.payload) {
    if (t.name.size() > 0xFFFF) throw FormatError("tensor name too long");
    w.u64(t.pad_id);
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name);
    const Shape& shape = t.value.shape();
    w.u16(static_cast<std::uint16_t>(shape.size()));
    for (std::size_t d : shape) w.u64(d);
  }
  for (const WireTensor& t : msg.payload) {
    for (double v : t.value.values()) w.f64(v);
  }
  w.patch_u32(0, static_cast<std::uint32_t>(w.size() - 4));
  return std::move(w.buffer());
}

RoundMessage decode_frame(std::span<const std::uint8_t> frame) {
  detail::ByteReader r(frame);
  const std::uint32_t len = r.u32();
  if (len != r.remaining()) throw FormatError("frame length mismatch");
  if (r.u32() != kMagic) throw FormatError("bad frame magic");
  if (r.u16() != kVersion) throw FormatError("unsupported frame version");
  const std::uint16_t kind = r.u16();
  if (kind > static_cast<std::uint16_t>(MessageKind::Prediction)) {
    throw FormatError("unknown message kind " + std::to_string(kind));
  }
  RoundMessage msg;
  msg.kind = static_cast<MessageKind>(kind);
  msg.sender = r.u32();
  msg.receiver = r.u32();
  msg.round = r.u32();
  msg.n_k = r.u64();
  msg.masked = (r.u32() & kFlagMasked) != 0;
  const std::uint32_t count = r.u32();
  std::vector<Shape> shapes;
  for (std::uint32_t i = 0; i < count; ++i) {
    WireTensor t;
    t.pad_id = r.u64();
    t.name = r.bytes(r.u16());
    Shape shape(r.u16());
    for (std::size_t& d : shape) d = r.u64();
    shapes.push_back(std::move(shape));
    msg.payload.push_back(std::move(t));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t n = shape_numel(shapes[i]);
    if (n > r.remaining() / 8) throw FormatError("truncated frame body");
    std::vector<double> values(n);
    for (double& v : values) v = r.f64();
    msg.payload[i].value = Tensor(shapes[i], std::move(values));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in frame");
  return msg;
}

PadChannel::PadChannel(std::uint64_t seed, std::uint32_t client, Direction dir, double scale)
    : rng_(seed, stream_id("wire", client, static_cast<std::uint64_t>(dir))),
      id_base_((std::uint64_t{1} << 63) | (static_cast<std::uint64_t>(client) << 40) |
               (static_cast<std::uint64_t>(dir) << 39)),
      scale_(scale) {}

MaskPad PadChannel::next(const Shape& shape) {
  MaskDistribution dist;
  dist.scale = scale_;
  dist.relative = false;
  return gen_mask(shape, rng_, dist, id_base_ | ++counter_, "wire");
}

RoundMessage seal(MessageKind kind, std::uint32_t sender, std::uint32_t receiver,
                  std::uint32_t round, std::uint64_t n_k, const NamedTensors& tensors,
                  PadChannel* channel, PadLedger* ledger) {
  PrecisionScope exact(Precision::Exact);  // wire crypto runs in the enclave at full width
  RoundMessage msg;
  msg.kind = kind;
  msg.sender = sender;
  msg.receiver = receiver;
  msg.round = round;
  msg.n_k = n_k;
  msg.masked = channel != nullptr;
  for (const auto& [name, value] : tensors) {
    WireTensor t{name, value.detach(), 0};
    if (channel) {
      MaskPad pad = channel->next(value.shape());
      if (ledger) ledger->record_issue(pad);
      MaskedTensor m = mask(value, pad, ledger);
      t.value = m.payload;
      t.pad_id = m.pad_id;
    }
    msg.payload.push_back(std::move(t));
  }
  return msg;
}

NamedTensors open(const RoundMessage& msg, PadChannel* channel) {
  if (msg.masked != (channel != nullptr)) {
    throw ProtocolError(std::string(msg.masked ? "masked" : "plaintext") + " " +
                        std::string(to_string(msg.kind)) + " from " + party_name(msg.sender) +
                        (msg.masked ? " without a pad channel" : " on a masked channel"));
  }
  PrecisionScope exact(Precision::Exact);
  NamedTensors out;
  for (const WireTensor& t : msg.payload) {
    if (!channel) {
      out.emplace_back(t.name, t.value);
      continue;
    }
    MaskPad pad = channel->next(t.value.shape());
    if (pad.id() != t.pad_id) {
      throw ProtocolError("pad stream out of step for '" + t.name + "' from " +
                          party_name(msg.sender));
    }
    out.emplace_back(t.name, unmask(MaskedTensor{t.value, t.pad_id}, pad));
  }
  return out;
}

void Network::send(const RoundMessage& msg) {
  std::vector<std::uint8_t> frame = encode_frame(msg);
  if (trace_) {
    TraceEvent ev;
    ev.kind = EventKind::Wire;
    ev.phase = Phase::Transfer;
    ev.site = "wire." + std::string(to_string(msg.kind));
    ev.party = party_name(msg.sender);
    ev.domain = TrustDomain::Untrusted;
    ev.state = msg.masked ? DataState::Masked : DataState::Plaintext;
    ev.bytes = frame.size();
    trace_->record(std::move(ev));
  }
  std::lock_guard lock(mu_);
  log_.push_back({msg.sender, msg.receiver, msg.round, msg.kind, msg.masked, frame.size()});
  queues_[msg.receiver].push_back(std::move(frame));
}

std::optional<RoundMessage> Network::receive(std::uint32_t receiver) {
  std::vector<std::uint8_t> frame;
  {
    std::lock_guard lock(mu_);
    auto it = queues_.find(receiver);
    if (it == queues_.end() || it->second.empty()) return std::nullopt;
    frame = std::move(it->second.front());
    it->second.pop_front();
  }
  return decode_frame(frame);
}

std::size_t Network::pending(std::uint32_t receiver) const {
  std::lock_guard lock(mu_);
  auto it = queues_.find(receiver);
  return it == queues_.end() ? 0 : it->second.size();
}

std::vector<Network::LogEntry> Network::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t Network::count(MessageKind kind, std::optional<std::uint32_t> sender) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(log_.begin(), log_.end(), [&](const LogEntry& e) {
    return e.kind == kind && (!sender || e.sender == *sender);
  }));
}

}  // namespace slicefl
