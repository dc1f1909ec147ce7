// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "slicefl/partition.hpp"

namespace slicefl {

enum class EventKind {
  Op,        // an op executed in `domain` on data in `state`
  Crossing,  // a tensor moved across the enclave boundary into `domain`
  PadUse,    // a one-time pad was applied
  Wire,      // a message on the client-server network
};
enum class Phase { Forward, Backward, Transfer };

std::string_view to_string(EventKind k);
std::string_view to_string(Phase p);

struct TraceEvent {
  EventKind kind = EventKind::Op;
  Phase phase = Phase::Forward;
  std::string site;
  std::string party;
  TrustDomain domain = TrustDomain::Trusted;
  DataState state = DataState::Plaintext;
  bool owner_local = false;
  std::uint64_t pad_id = 0;
  std::uint64_t bytes = 0;

  /// Plaintext data observed by untrusted code that does not own it. A
  /// plaintext crossing is followed by the op that reads it, so only the
  /// op (or wire message) counts.
  bool is_violation() const {
    return (kind == EventKind::Op || kind == EventKind::Wire) &&
           domain == TrustDomain::Untrusted &&
           state == DataState::Plaintext && !owner_local;
  }

  nlohmann::json to_json() const;
  static TraceEvent from_json(const nlohmann::json& j);
};

struct TraceSummary {
  std::size_t ops_trusted = 0;
  std::size_t ops_untrusted = 0;
  std::size_t crossings = 0;
  std::uint64_t crossing_bytes = 0;
  std::size_t wire_messages = 0;
  std::size_t wire_masked = 0;
  std::uint64_t wire_bytes = 0;
  std::size_t untrusted_masked = 0;
  std::size_t untrusted_owner_local = 0;
  std::size_t violations = 0;
  std::map<std::string, std::size_t> violations_by_site;
  std::map<std::uint64_t, std::uint32_t> pad_uses;

  void add(const TraceEvent& ev);
  std::size_t pad_reuses() const;
};

/// Records every op, boundary crossing, pad use and wire message of a run.
/// Always keeps the running summary; keeps the events themselves only when
/// constructed with keep_events. Thread-safe.
class Trace {
 public:
  explicit Trace(bool keep_events = false) : keep_events_(keep_events) {}

  void record(TraceEvent ev);

  TraceSummary summary() const;
  std::vector<TraceEvent> events() const;
  bool keeps_events() const { return keep_events_; }

  /// One JSON object per line. Requires keep_events.
  void write_jsonl(std::ostream& out) const;
  static std::vector<TraceEvent> read_jsonl(std::istream& in);

 private:
  bool keep_events_;
  mutable std::mutex mu_;
  TraceSummary summary_;
  std::vector<TraceEvent> events_;
};

struct AuditReport {
  TraceSummary summary;
  bool pass = false;

  nlohmann::json to_json() const;
};

/// Passes iff no plaintext tensor was observed in the untrusted domain by a
/// party that does not own it, and no pad was applied twice.
AuditReport audit_taint(const TraceSummary& summary);
AuditReport audit_taint(const Trace& trace);
AuditReport audit_taint(std::span<const TraceEvent> events);

}  // namespace slicefl
