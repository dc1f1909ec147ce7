// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slicefl/checkpoint.hpp"
#include "slicefl/otp.hpp"
#include "slicefl/tensor.hpp"
#include "slicefl/trace.hpp"

namespace slicefl {

enum class MessageKind : std::uint16_t {
  AdapterUpdate = 0,
  EmbeddingBatch = 1,
  GlobalBroadcast = 2,
  Query = 3,
  Prediction = 4,
};
std::string_view to_string(MessageKind kind);

inline constexpr std::uint32_t kServerId = 0;
/// "server" for 0, "client<k>" otherwise.
std::string party_name(std::uint32_t id);

struct WireTensor {
  std::string name;
  Tensor value;
  std::uint64_t pad_id = 0;  // 0 when sent in plaintext
};

struct RoundMessage {
  std::uint32_t sender = 0;
  std::uint32_t receiver = 0;
  std::uint32_t round = 0;
  MessageKind kind = MessageKind::AdapterUpdate;
  std::uint64_t n_k = 0;
  bool masked = false;
  std::vector<WireTensor> payload;
};

/// Frame layout, all integers little-endian:
///   u32 frame_len (bytes after this field)
///   u32 magic "SFL1"   u16 version (1)   u16 kind
///   u32 sender   u32 receiver   u32 round   u64 n_k
///   u32 flags (bit 0: masked)   u32 tensor_count
///   tensor_count x { u64 pad_id, u16 name_len, name, u16 ndim, ndim x u64 dim }
///   body: every tensor's values as row-major IEEE-754 f64, in header order
std::vector<std::uint8_t> encode_frame(const RoundMessage& msg);
/// Throws FormatError on a bad magic, version, kind, length or truncation.
RoundMessage decode_frame(std::span<const std::uint8_t> frame);

/// One direction of a pad stream pre-shared between a client and the
/// server enclave at provisioning time. Both ends construct the same
/// channel and draw pads in the same order, so only the pad id travels.
class PadChannel {
 public:
  enum class Direction : std::uint8_t { Upload = 0, Download = 1 };

  PadChannel(std::uint64_t seed, std::uint32_t client, Direction dir, double scale);
  MaskPad next(const Shape& shape);

 private:
  Rng rng_;
  std::uint64_t id_base_;
  std::uint64_t counter_ = 0;
  double scale_;
};

/// Builds a message; masks every tensor with the next pads of `channel`
/// when one is given.
RoundMessage seal(MessageKind kind, std::uint32_t sender, std::uint32_t receiver,
                  std::uint32_t round, std::uint64_t n_k, const NamedTensors& tensors,
                  PadChannel* channel, PadLedger* ledger = nullptr);
/// Recovers the tensors of `msg`. A masked message needs the matching
/// channel; pad ids out of step with it raise ProtocolError.
NamedTensors open(const RoundMessage& msg, PadChannel* channel);

/// Reliable in-order delivery between parties. Every frame is encoded,
/// recorded on the trace as a wire event, and decoded on receipt.
class Network {
 public:
  struct LogEntry {
    std::uint32_t sender, receiver, round;
    MessageKind kind;
    bool masked;
    std::size_t bytes;
  };

  explicit Network(Trace* trace = nullptr) : trace_(trace) {}

  void send(const RoundMessage& msg);
  std::optional<RoundMessage> receive(std::uint32_t receiver);
  std::size_t pending(std::uint32_t receiver) const;

  std::vector<LogEntry> log() const;
  std::size_t count(MessageKind kind, std::optional<std::uint32_t> sender = std::nullopt) const;

 private:
  Trace* trace_;
  mutable std::mutex mu_;
  std::map<std::uint32_t, std::deque<std::vector<std::uint8_t>>> queues_;
  std::vector<LogEntry> log_;
};

}  // namespace slicefl
