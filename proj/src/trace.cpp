// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/trace.hpp"

#include <istream>
#include <ostream>

#include "slicefl/errors.hpp"

namespace slicefl {

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Op: return "op";
    case EventKind::Crossing: return "crossing";
    case EventKind::PadUse: return "pad_use";
    case EventKind::Wire: return "wire";
  }
  return "?";
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Forward: return "forward";
    case Phase::Backward: return "backward";
    case Phase::Transfer: return "transfer";
  }
  return "?";
}

namespace {

template <typename E, std::size_t N>
E parse_enum(const std::string& text, const E (&all)[N]) {
  for (E e : all) {
    if (to_string(e) == text) return e;
  }
  throw FormatError("unknown trace field value: " + text);
}

constexpr EventKind kKinds[] = {EventKind::Op, EventKind::Crossing, EventKind::PadUse,
                                EventKind::Wire};
constexpr Phase kPhases[] = {Phase::Forward, Phase::Backward, Phase::Transfer};
constexpr TrustDomain kDomains[] = {TrustDomain::Trusted, TrustDomain::Untrusted};
constexpr DataState kStates[] = {DataState::Plaintext, DataState::Masked};

}  // namespace

nlohmann::json TraceEvent::to_json() const {
  nlohmann::json j = {{"kind", to_string(kind)},     {"phase", to_string(phase)},
                      {"site", site},                {"party", party},
                      {"domain", to_string(domain)}, {"state", to_string(state)}};
  if (owner_local) j["owner_local"] = true;
  if (pad_id) j["pad_id"] = pad_id;
  if (bytes) j["bytes"] = bytes;
  return j;
}

TraceEvent TraceEvent::from_json(const nlohmann::json& j) {
  try {
    TraceEvent ev;
    ev.kind = parse_enum(j.at("kind").get<std::string>(), kKinds);
    ev.phase = parse_enum(j.at("phase").get<std::string>(), kPhases);
    ev.site = j.at("site").get<std::string>();
    ev.party = j.at("party").get<std::string>();
    ev.domain = parse_enum(j.at("domain").get<std::string>(), kDomains);
    ev.state = parse_enum(j.at("state").get<std::string>(), kStates);
    ev.owner_local = j.value("owner_local", false);
    ev.pad_id = j.value("pad_id", std::uint64_t{0});
    ev.bytes = j.value("bytes", std::uint64_t{0});
    return ev;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad trace event: ") + e.what());
  }
}

void TraceSummary::add(const TraceEvent& ev) {
  switch (ev.kind) {
    case EventKind::Op:
      ++(ev.domain == TrustDomain::Trusted ? ops_trusted : ops_untrusted);
      break;
    case EventKind::Crossing:
      ++crossings;
      crossing_bytes += ev.bytes;
      break;
    case EventKind::PadUse:
      ++pad_uses[ev.pad_id];
      return;
    case EventKind::Wire:
      ++wire_messages;
      wire_bytes += ev.bytes;
      if (ev.state == DataState::Masked) ++wire_masked;
      break;
  }
  if (ev.kind == EventKind::Crossing || ev.domain != TrustDomain::Untrusted) return;
  if (ev.state == DataState::Masked) {
    ++untrusted_masked;
  } else if (ev.owner_local) {
    ++untrusted_owner_local;
  } else {
    ++violations;
    ++violations_by_site[ev.site];
  }
}

std::size_t TraceSummary::pad_reuses() const {
  std::size_t n = 0;
  for (const auto& [id, uses] : pad_uses) n += uses > 1;
  return n;
}

void Trace::record(TraceEvent ev) {
  std::lock_guard lock(mu_);
  summary_.add(ev);
  if (keep_events_) events_.push_back(std::move(ev));
}

TraceSummary Trace::summary() const {
  std::lock_guard lock(mu_);
  return summary_;
}

std::vector<TraceEvent> Trace::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

void Trace::write_jsonl(std::ostream& out) const {
  if (!keep_events_) throw ContractError("trace was recorded without events");
  std::lock_guard lock(mu_);
  for (const TraceEvent& ev : events_) out << ev.to_json().dump() << '\n';
}

std::vector<TraceEvent> Trace::read_jsonl(std::istream& in) {
  std::vector<TraceEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("bad trace line: ") + e.what());
    }
    out.push_back(TraceEvent::from_json(j));
  }
  return out;
}

nlohmann::json AuditReport::to_json() const {
  nlohmann::json sites = nlohmann::json::object();
  for (const auto& [site, n] : summary.violations_by_site) sites[site] = n;
  return {
      {"pass", pass},
      {"plaintext_in_untrusted", summary.violations},
      {"violations_by_site", sites},
      {"untrusted_masked_observations", summary.untrusted_masked},
      {"untrusted_owner_local_ops", summary.untrusted_owner_local},
      {"ops", {{"trusted", summary.ops_trusted}, {"untrusted", summary.ops_untrusted}}},
      {"crossings", summary.crossings},
      {"crossing_bytes", summary.crossing_bytes},
      {"wire", {{"messages", summary.wire_messages},
                {"masked", summary.wire_masked},
                {"bytes", summary.wire_bytes}}},
      {"pads", {{"used", summary.pad_uses.size()}, {"reused", summary.pad_reuses()}}},
  };
}

AuditReport audit_taint(const TraceSummary& summary) {
  AuditReport r;
  r.summary = summary;
  r.pass = summary.violations == 0 && summary.pad_reuses() == 0;
  return r;
}

AuditReport audit_taint(const Trace& trace) { return audit_taint(trace.summary()); }

AuditReport audit_taint(std::span<const TraceEvent> events) {
  TraceSummary s;
  for (const TraceEvent& ev : events) s.add(ev);
  return audit_taint(s);
}

}  // namespace slicefl
